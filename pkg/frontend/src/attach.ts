/**
 * Entry point: attach the interactive service layer to a portal-rendered
 * document.  Clicking any annotated element opens the icon menu; the
 * gutters are built from the document's blocks and its /threads data.
 */

import { PortalClient, ServiceEntry, Thread } from "./api.js";
import { contextFrom, contextOf, UiContext } from "./context.js";
import { DefinitionPopup } from "./definition.js";
import { DiscussionPanel } from "./discussion.js";
import { FoldController } from "./fold.js";
import { buildGutters, GutterHandles } from "./gutters.js";
import { IconMenu } from "./menu.js";
import { PrereqView, PrereqViewOptions } from "./prereq.js";

export interface AttachOptions extends PrereqViewOptions {
  client?: PortalClient;
  docPath?: string;
  revision?: number;
}

export class ActiveDocument {
  readonly client: PortalClient;
  readonly menu: IconMenu;
  readonly folds: FoldController;
  readonly definitions: DefinitionPopup;
  readonly prereqs: PrereqView;
  readonly discussions: DiscussionPanel;
  gutters: GutterHandles | null = null;
  targets: HTMLElement[] = [];
  private notice: HTMLElement | null = null;

  constructor(
    readonly root: HTMLElement,
    options: AttachOptions = {},
  ) {
    this.client = options.client ?? new PortalClient();
    const docPath = options.docPath ?? this.docPathFromRoot();
    this.folds = new FoldController(this.client);
    this.definitions = new DefinitionPopup(this.client);
    this.prereqs = new PrereqView(this.client, options);
    this.discussions = new DiscussionPanel(
      this.client,
      docPath,
      options.revision ?? 0,
    );
    this.menu = new IconMenu(this.client, (ctx, entry) => {
      void this.dispatch(ctx, entry);
    });
  }

  private docPathFromRoot(): string {
    const fragment = this.root.querySelector("[data-fragment]") as HTMLElement | null;
    const id = fragment?.dataset.fragment ?? "";
    const bang = id.lastIndexOf("!");
    return bang === -1 ? "" : id.slice(0, bang);
  }

  /** Register click handlers on every data-fragment element, build gutters. */
  async start(): Promise<void> {
    this.targets = Array.from(
      this.root.querySelectorAll("[data-fragment]"),
    ) as HTMLElement[];
    for (const element of this.targets) {
      element.addEventListener("click", (event) => {
        const ctx = contextFrom(event.target);
        if (ctx && ctx.element === element) {
          event.stopPropagation();
          void this.menu.show(ctx);
        }
      });
    }
    if (!this.targets.length) return; // nothing annotated: no gutters, no errors
    let threads: Thread[] = [];
    try {
      threads = await this.client.threadsForDocument(this.docPathFromRoot());
    } catch (error) {
      this.showNotice(`discussion data unavailable (${(error as Error).message})`);
    }
    this.gutters = buildGutters(
      this.root,
      threads,
      (line) => void this.folds.toggle(line.target).catch((e) => this.showNotice(String(e))),
      (line) => {
        const ctx = contextOf(line.target);
        if (ctx) void this.discussions.show(ctx);
      },
    );
    this.root.before(this.gutters.foldingBar);
    this.root.after(this.gutters.infoBar);
  }

  async dispatch(ctx: UiContext, entry: ServiceEntry): Promise<void> {
    try {
      switch (entry.id) {
        case "discuss":
          await this.discussions.show(ctx);
          break;
        case "definition-lookup":
          if (ctx.symbol) await this.definitions.show(ctx.symbol, ctx.element);
          break;
        case "prerequisites":
          await this.prereqs.show(ctx.symbol ?? this.uriForStructure(ctx));
          break;
        case "fold":
          await this.folds.toggle(ctx.element);
          break;
      }
    } catch (error) {
      this.showNotice(String(error));
    }
  }

  private uriForStructure(ctx: UiContext): string {
    // document/module contexts navigate by document URI
    const bang = ctx.fragment.lastIndexOf("!");
    const path = bang === -1 ? ctx.fragment : ctx.fragment.slice(0, bang);
    const doc = path.endsWith(".stx") ? path.slice(0, -4) : path;
    return `//${doc}`;
  }

  showNotice(message: string): void {
    this.notice?.remove();
    const notice = document.createElement("div");
    notice.className = "sp-error-notice";
    notice.textContent = message;
    const dismiss = document.createElement("button");
    dismiss.textContent = "dismiss";
    dismiss.addEventListener("click", () => notice.remove());
    notice.appendChild(dismiss);
    document.body.appendChild(notice);
    this.notice = notice;
  }
}

export async function attach(
  root: HTMLElement,
  options: AttachOptions = {},
): Promise<ActiveDocument> {
  const session = new ActiveDocument(root, options);
  await session.start();
  return session;
}
