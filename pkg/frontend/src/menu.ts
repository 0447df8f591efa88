/**
 * The icon context menu: one entry per service available in the current
 * context, in the server's order.  The menu never invents an entry; its
 * contents are derived solely from the /services response.
 */

import { PortalClient, ServiceEntry } from "./api.js";
import { UiContext } from "./context.js";

const ICON_GLYPHS: Record<string, string> = {
  "question-mark": "?",
  book: "\u{1f4d6}",
  graph: "◉",
  collapse: "⊟",
};

export type ServiceHandler = (ctx: UiContext, entry: ServiceEntry) => void;

export class IconMenu {
  private element: HTMLElement | null = null;

  constructor(
    private readonly client: PortalClient,
    private readonly onSelect: ServiceHandler,
  ) {
    document.addEventListener("click", (event) => {
      if (this.element && !this.element.contains(event.target as Node)) {
        this.hide();
      }
    });
    document.addEventListener("keydown", (event) => {
      if (event.key === "Escape") this.hide();
    });
  }

  get visible(): boolean {
    return this.element !== null;
  }

  entries(): ServiceEntry[] {
    if (!this.element) return [];
    return Array.from(this.element.querySelectorAll("button[data-service]")).map(
      (button) => ({
        id: (button as HTMLElement).dataset.service ?? "",
        label: (button as HTMLElement).title,
        icon: (button as HTMLElement).dataset.icon ?? "",
      }),
    );
  }

  /** Fetch /services for the context and show one icon per entry. */
  async show(ctx: UiContext): Promise<void> {
    this.hide();
    let services: ServiceEntry[];
    try {
      services = (await this.client.services(ctx.fragment)).services;
    } catch {
      services = []; // empty-menu state when the fetch fails
    }
    const menu = document.createElement("div");
    menu.className = "sp-icon-menu";
    menu.dataset.fragment = ctx.fragment;
    if (!services.length) {
      menu.classList.add("sp-icon-menu-empty");
    }
    for (const entry of services) {
      const button = document.createElement("button");
      button.className = "sp-icon";
      button.dataset.service = entry.id;
      button.dataset.icon = entry.icon;
      button.title = entry.label;
      button.textContent = ICON_GLYPHS[entry.icon] ?? entry.label;
      button.addEventListener("click", (event) => {
        event.stopPropagation();
        this.hide();
        this.onSelect(ctx, entry);
      });
      menu.appendChild(button);
    }
    const box = ctx.element.getBoundingClientRect();
    menu.style.position = "absolute";
    menu.style.left = `${box.left + window.scrollX}px`;
    menu.style.top = `${box.bottom + window.scrollY}px`;
    document.body.appendChild(menu);
    this.element = menu;
  }

  hide(): void {
    this.element?.remove();
    this.element = null;
  }
}
