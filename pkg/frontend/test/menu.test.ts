import { beforeEach, describe, expect, it } from "vitest";

import { PortalClient } from "../src/api.js";
import { contextOf, escapeAttr } from "../src/context.js";
import { IconMenu } from "../src/menu.js";
import { FakePortal, mountDocument, recording } from "./helpers.js";

function menuFor(onSelect = () => {}): IconMenu {
  return new IconMenu(new PortalClient(), onSelect);
}

describe("icon menu fidelity", () => {
  let root: HTMLElement;

  beforeEach(() => {
    new FakePortal().install();
    root = mountDocument();
  });

  it("renders exactly the /services entries, in order, for every context kind", async () => {
    for (const [fragment, recorded] of Object.entries(recording.services)) {
      const element = root.closest("body")!.querySelector(
        `[data-fragment="${escapeAttr(fragment)}"]`,
      ) as HTMLElement;
      expect(element, fragment).not.toBeNull();
      const ctx = contextOf(element)!;
      const menu = menuFor();
      await menu.show(ctx);
      expect(menu.entries(), fragment).toEqual(recorded.services);
      menu.hide();
    }
  });

  it("covers all six context kinds", () => {
    const kinds = new Set(
      Object.keys(recording.services).map((fragment) => {
        const element = document.querySelector(
          `[data-fragment="${escapeAttr(fragment)}"]`,
        ) as HTMLElement;
        return element.dataset.kind;
      }),
    );
    expect(kinds).toEqual(
      new Set(["document", "module", "definition", "formula", "subterm", "symbol-occurrence"]),
    );
  });

  it("opens on click of an annotated element", async () => {
    const element = document.querySelector(
      '[data-fragment="nat.stx!0.2"]',
    ) as HTMLElement;
    const menu = menuFor();
    await menu.show(contextOf(element)!);
    expect(menu.visible).toBe(true);
    expect(document.querySelector(".sp-icon-menu")).not.toBeNull();
  });

  it("selecting an icon dispatches the service and closes the menu", async () => {
    const chosen: string[] = [];
    const menu = menuFor();
    const withSpy = new IconMenu(new PortalClient(), (_ctx, entry) => {
      chosen.push(entry.id);
    });
    const element = document.querySelector(
      '[data-fragment="nat.stx!0.2"]',
    ) as HTMLElement;
    await withSpy.show(contextOf(element)!);
    const fold = document.querySelector(
      'button[data-service="fold"]',
    ) as HTMLButtonElement;
    fold.click();
    expect(chosen).toEqual(["fold"]);
    expect(withSpy.visible).toBe(false);
    menu.hide();
  });

  it("shows the empty-menu state when the fetch fails", async () => {
    new FakePortal({ failServices: true }).install();
    const element = document.querySelector(
      '[data-fragment="nat.stx!0.2"]',
    ) as HTMLElement;
    const menu = menuFor();
    await menu.show(contextOf(element)!);
    expect(menu.entries()).toEqual([]);
    expect(document.querySelector(".sp-icon-menu-empty")).not.toBeNull();
  });

  it("never invents an entry beyond the server list", async () => {
    const element = document.querySelector(
      '[data-fragment="nat.stx!"]',
    ) as HTMLElement;
    const menu = menuFor();
    await menu.show(contextOf(element)!);
    const serverIds = recording.services["nat.stx!"].services.map((s) => s.id);
    expect(menu.entries().map((e) => e.id)).toEqual(serverIds);
    expect(menu.entries().length).toBe(2); // no client-side additions
  });
});
