/**
 * Localized discussion panel for one fragment: lists the fragment's threads
 * and lets the reader open a new one.
 */

import { PortalClient, Thread } from "./api.js";
import { UiContext } from "./context.js";

export class DiscussionPanel {
  private element: HTMLElement | null = null;

  constructor(
    private readonly client: PortalClient,
    private readonly docPath: string,
    private readonly revision: number,
  ) {}

  get visible(): boolean {
    return this.element !== null;
  }

  threadIds(): string[] {
    if (!this.element) return [];
    return Array.from(this.element.querySelectorAll("[data-thread]")).map(
      (el) => (el as HTMLElement).dataset.thread ?? "",
    );
  }

  async show(ctx: UiContext, container?: HTMLElement): Promise<void> {
    this.hide();
    const panel = document.createElement("aside");
    panel.className = "sp-discussion-panel";
    panel.dataset.fragment = ctx.fragment;
    let threads: Thread[] = [];
    try {
      threads = await this.client.threadsForFragment(ctx.fragment);
    } catch (error) {
      panel.classList.add("sp-discussion-error");
      panel.textContent = `discussions unavailable (${(error as Error).message})`;
    }
    for (const thread of threads) {
      panel.appendChild(this.renderThread(thread));
    }
    panel.appendChild(this.renderComposer(ctx, panel));
    (container ?? document.body).appendChild(panel);
    this.element = panel;
  }

  private renderThread(thread: Thread): HTMLElement {
    const item = document.createElement("section");
    item.className = "sp-thread";
    item.dataset.thread = thread.id;
    const title = document.createElement("h3");
    title.textContent = thread.title;
    item.appendChild(title);
    for (const post of thread.posts) {
      const paragraph = document.createElement("p");
      paragraph.textContent = `${post.author}: ${post.body}`;
      item.appendChild(paragraph);
    }
    return item;
  }

  private renderComposer(ctx: UiContext, panel: HTMLElement): HTMLElement {
    const form = document.createElement("form");
    form.className = "sp-thread-composer";
    const title = document.createElement("input");
    title.name = "title";
    title.placeholder = "title";
    const body = document.createElement("textarea");
    body.name = "body";
    body.placeholder = "ask or report something about this object";
    const submit = document.createElement("button");
    submit.type = "submit";
    submit.textContent = "open thread";
    form.append(title, body, submit);
    form.addEventListener("submit", async (event) => {
      event.preventDefault();
      try {
        const thread = await this.client.createThread(
          { doc: this.docPath, revision: this.revision, fragment: ctx.fragment },
          title.value,
          body.value,
          "reader",
        );
        panel.insertBefore(this.renderThread(thread), form);
        title.value = "";
        body.value = "";
      } catch (error) {
        form.dataset.error = (error as Error).message;
      }
    });
    return form;
  }

  hide(): void {
    this.element?.remove();
    this.element = null;
  }
}
