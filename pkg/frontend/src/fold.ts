/**
 * Fold toggling: optimistic content swap confirmed by the server.
 *
 * The element's content is replaced with the ellipsis placeholder right
 * away, the fold is POSTed, and on failure the swap is rolled back so the
 * display always ends up mirroring the server's fold state.  At most one
 * mutation per fragment is in flight; later toggles queue behind it.
 */

import { PortalClient } from "./api.js";

export const ELLIPSIS = "⋯";

interface Saved {
  children: Node[];
}

export class FoldController {
  private saved = new Map<string, Saved>();
  private pending = new Map<string, Promise<void>>();

  constructor(private readonly client: PortalClient) {}

  isFolded(element: HTMLElement): boolean {
    return element.dataset.folded === "true";
  }

  /** Toggle a fragment; resolves when the server has confirmed. */
  toggle(element: HTMLElement): Promise<void> {
    const fragment = element.dataset.fragment;
    if (!fragment) return Promise.resolve();
    const previous = this.pending.get(fragment) ?? Promise.resolve();
    const next = previous
      .catch(() => undefined)
      .then(() => this.perform(element, fragment));
    this.pending.set(fragment, next);
    return next;
  }

  private async perform(element: HTMLElement, fragment: string): Promise<void> {
    const fold = !this.isFolded(element);
    this.apply(element, fragment, fold);
    try {
      await this.client.setFold(fragment, fold);
    } catch (error) {
      this.apply(element, fragment, !fold); // roll the swap back
      throw error;
    }
  }

  private apply(element: HTMLElement, fragment: string, fold: boolean): void {
    if (fold) {
      this.saved.set(fragment, { children: Array.from(element.childNodes) });
      element.replaceChildren(document.createTextNode(ELLIPSIS));
      element.dataset.folded = "true";
    } else {
      const saved = this.saved.get(fragment);
      element.replaceChildren(...(saved ? saved.children : []));
      this.saved.delete(fragment);
      delete element.dataset.folded;
    }
  }
}
