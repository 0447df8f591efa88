/**
 * Context extraction from annotated elements.
 *
 * A UiContext is built only from elements bearing `data-fragment`; the
 * symbol falls back to the head child of an application subterm (the node
 * whose term path extends the parent's with step 0), mirroring how the
 * document model assigns symbols to subterms.
 */

export interface UiContext {
  element: HTMLElement;
  fragment: string;
  kind: string;
  symbol: string | null;
}

function headChildSymbol(element: HTMLElement): string | null {
  const path = element.dataset.termpath;
  if (path === undefined) return null;
  const headPath = path === "" ? "0" : `${path}.0`;
  for (const child of Array.from(element.children)) {
    const el = child as HTMLElement;
    if (el.dataset && el.dataset.termpath === headPath && el.dataset.symbol) {
      return el.dataset.symbol;
    }
  }
  return null;
}

export function contextOf(element: HTMLElement): UiContext | null {
  const fragment = element.dataset.fragment;
  if (!fragment) return null;
  return {
    element,
    fragment,
    kind: element.dataset.kind ?? "",
    symbol: element.dataset.symbol ?? headChildSymbol(element),
  };
}

/** Nearest annotated ancestor-or-self of an arbitrary event target. */
export function contextFrom(target: EventTarget | null): UiContext | null {
  let node = target instanceof Element ? target : null;
  while (node) {
    if (node instanceof HTMLElement && node.dataset.fragment) {
      return contextOf(node);
    }
    node = node.parentElement;
  }
  return null;
}

/** Escape a value for use inside a quoted attribute selector. */
export function escapeAttr(value: string): string {
  return value.replace(/\\/g, "\\\\").replace(/"/g, '\\"');
}

/** Document link for a portal URI: `//doc#frag` -> `/doc/<doc>.stx#frag`. */
export function uriToDocLink(uri: string): string {
  const body = uri.startsWith("//") ? uri.slice(2) : uri;
  const hashAt = body.indexOf("#");
  const doc = hashAt === -1 ? body : body.slice(0, hashAt);
  const frag = hashAt === -1 ? "" : body.slice(hashAt);
  return `/doc/${doc}.stx${frag}`;
}
