/**
 * Folding bar (left) and info bar (right).
 *
 * Lines mirror the server's line model: one line per block-level fragment
 * (modules and statements) in document order.  The folding bar offers one
 * fold control per line; the info bar shows a discussion marker on every
 * line whose fragment (or nested fragment) anchors a thread.
 */

import { Thread } from "./api.js";
import { escapeAttr } from "./context.js";

const BLOCK_KINDS = new Set(["module", "definition", "theorem", "example"]);

export interface GutterLine {
  number: number;
  target: HTMLElement;
  fragment: string;
  threadIds: string[];
}

export function blockLines(root: HTMLElement): GutterLine[] {
  const lines: GutterLine[] = [];
  const blocks = Array.from(root.querySelectorAll("[data-fragment]")).filter((el) =>
    BLOCK_KINDS.has((el as HTMLElement).dataset.kind ?? ""),
  ) as HTMLElement[];
  blocks.forEach((element, index) => {
    lines.push({
      number: index + 1,
      target: element,
      fragment: element.dataset.fragment ?? "",
      threadIds: [],
    });
  });
  return lines;
}

/** Map each thread to the line of the block containing its anchor. */
export function assignThreads(root: HTMLElement, lines: GutterLine[], threads: Thread[]): void {
  const lineByBlock = new Map(lines.map((line) => [line.target, line]));
  for (const thread of threads) {
    const anchor = root.querySelector(
      `[data-fragment="${escapeAttr(thread.anchor.fragment)}"]`,
    );
    if (!anchor) continue;
    let node: Element | null = anchor;
    while (node && !lineByBlock.has(node as HTMLElement)) {
      node = node.parentElement;
    }
    if (node) {
      lineByBlock.get(node as HTMLElement)!.threadIds.push(thread.id);
    }
  }
}

export interface GutterHandles {
  foldingBar: HTMLElement;
  infoBar: HTMLElement;
  lines: GutterLine[];
}

export function buildGutters(
  root: HTMLElement,
  threads: Thread[],
  onFold: (line: GutterLine) => void,
  onDiscuss: (line: GutterLine) => void,
): GutterHandles {
  const lines = blockLines(root);
  assignThreads(root, lines, threads);

  const foldingBar = document.createElement("nav");
  foldingBar.className = "sp-folding-bar";
  const infoBar = document.createElement("nav");
  infoBar.className = "sp-info-bar";

  for (const line of lines) {
    const fold = document.createElement("button");
    fold.className = "sp-fold-control";
    fold.dataset.line = String(line.number);
    fold.dataset.target = line.fragment;
    fold.textContent = "▾";
    fold.addEventListener("click", () => onFold(line));
    foldingBar.appendChild(fold);

    const info = document.createElement("span");
    info.className = "sp-info-line";
    info.dataset.line = String(line.number);
    if (line.threadIds.length) {
      const marker = document.createElement("button");
      marker.className = "sp-discussion-marker";
      marker.dataset.threads = String(line.threadIds.length);
      marker.textContent = "✉";
      marker.title = `${line.threadIds.length} discussion(s)`;
      marker.addEventListener("click", () => onDiscuss(line));
      info.appendChild(marker);
    }
    infoBar.appendChild(info);
  }
  return { foldingBar, infoBar, lines };
}
