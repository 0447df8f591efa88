/**
 * Prerequisite graph view: inlines the server's annotated SVG and makes
 * every `data-uri` node navigate to its document anchor.
 */

import { PortalClient } from "./api.js";
import { uriToDocLink } from "./context.js";

export interface PrereqViewOptions {
  /** Navigation hook, defaults to assigning window.location. */
  navigate?: (url: string) => void;
}

export class PrereqView {
  private element: HTMLElement | null = null;
  private readonly navigate: (url: string) => void;

  constructor(
    private readonly client: PortalClient,
    options: PrereqViewOptions = {},
  ) {
    this.navigate = options.navigate ?? ((url) => window.location.assign(url));
  }

  get visible(): boolean {
    return this.element !== null;
  }

  nodeUris(): string[] {
    if (!this.element) return [];
    return Array.from(this.element.querySelectorAll("g[data-uri]")).map(
      (group) => group.getAttribute("data-uri") ?? "",
    );
  }

  async show(uri: string, container?: HTMLElement): Promise<void> {
    this.hide();
    const view = document.createElement("div");
    view.className = "sp-prereq-view";
    view.dataset.uri = uri;
    try {
      view.innerHTML = await this.client.prerequisitesSvg(uri);
    } catch (error) {
      view.classList.add("sp-prereq-error");
      view.textContent = `prerequisites unavailable (${(error as Error).message})`;
    }
    for (const group of Array.from(view.querySelectorAll("g[data-uri]"))) {
      group.addEventListener("click", () => {
        const target = group.getAttribute("data-uri");
        if (target) this.navigate(uriToDocLink(target));
      });
    }
    (container ?? document.body).appendChild(view);
    this.element = view;
  }

  hide(): void {
    this.element?.remove();
    this.element = null;
  }
}
