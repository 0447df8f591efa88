/**
 * Definition popup: shows the server-rendered definition fragment for a
 * symbol, verbatim, anchored near the element that asked for it.
 */

import { PortalClient } from "./api.js";

export class DefinitionPopup {
  private element: HTMLElement | null = null;

  constructor(private readonly client: PortalClient) {}

  get visible(): boolean {
    return this.element !== null;
  }

  bodyHtml(): string {
    return this.element?.querySelector(".sp-popup-body")?.innerHTML ?? "";
  }

  async show(symbol: string, near?: HTMLElement): Promise<void> {
    this.hide();
    const popup = document.createElement("div");
    popup.className = "sp-definition-popup";
    popup.dataset.symbol = symbol;
    const body = document.createElement("div");
    body.className = "sp-popup-body";
    try {
      body.innerHTML = await this.client.definitionHtml(symbol);
    } catch (error) {
      popup.classList.add("sp-popup-error");
      body.textContent = `no definition available (${(error as Error).message})`;
    }
    const close = document.createElement("button");
    close.className = "sp-popup-close";
    close.textContent = "×";
    close.addEventListener("click", () => this.hide());
    popup.append(close, body);
    if (near) {
      const box = near.getBoundingClientRect();
      popup.style.position = "absolute";
      popup.style.left = `${box.left + window.scrollX}px`;
      popup.style.top = `${box.bottom + window.scrollY}px`;
    }
    document.body.appendChild(popup);
    this.element = popup;
  }

  hide(): void {
    this.element?.remove();
    this.element = null;
  }
}
