import { beforeEach, describe, expect, it } from "vitest";

import { PortalClient } from "../src/api.js";
import { escapeAttr } from "../src/context.js";
import { ELLIPSIS, FoldController } from "../src/fold.js";
import { FakePortal, mountDocument, recording } from "./helpers.js";

const STATEMENT = "nat.stx!0.2";

function statementElement(): HTMLElement {
  return document.querySelector(`[data-fragment="${escapeAttr(STATEMENT)}"]`)!;
}

describe("fold interaction", () => {
  let portal: FakePortal;
  let client: PortalClient;
  let folds: FoldController;

  beforeEach(() => {
    portal = new FakePortal();
    portal.install();
    mountDocument();
    client = new PortalClient();
    folds = new FoldController(client);
  });

  it("clicking fold swaps in the ellipsis and posts the fold", async () => {
    const element = statementElement();
    const original = element.innerHTML;
    await folds.toggle(element);
    expect(element.textContent).toBe(ELLIPSIS);
    expect(element.dataset.folded).toBe("true");
    const posted = portal.requests.filter(
      (r) => r.method === "POST" && r.url === "/folds",
    );
    expect(posted).toHaveLength(1);
    expect(posted[0].body).toEqual({ fragment: STATEMENT, folded: true });
    expect(original).not.toBe(element.innerHTML);
  });

  it("a full page re-fetch reproduces the same folded render", async () => {
    const element = statementElement();
    await folds.toggle(element);
    const refetched = await client.documentHtml("nat.stx");
    expect(refetched).toBe(recording.doc.folded[STATEMENT]);
    // the server's folded element shows exactly what the local swap shows
    const host = document.createElement("div");
    host.innerHTML = refetched;
    const serverElement = host.querySelector(
      `[data-fragment="${escapeAttr(STATEMENT)}"]`,
    ) as HTMLElement;
    expect(serverElement.textContent).toBe(element.textContent);
    expect(serverElement.dataset.folded).toBe(element.dataset.folded);
  });

  it("rolls the swap back when the POST fails", async () => {
    new FakePortal({ failFolds: true }).install();
    const element = statementElement();
    const original = element.innerHTML;
    await expect(folds.toggle(element)).rejects.toThrow();
    expect(element.innerHTML).toBe(original);
    expect(element.dataset.folded).toBeUndefined();
  });

  it("second toggle restores the original children", async () => {
    const element = statementElement();
    const original = element.innerHTML;
    await folds.toggle(element);
    await folds.toggle(element);
    expect(element.innerHTML).toBe(original);
    expect(element.dataset.folded).toBeUndefined();
    const refetched = await client.documentHtml("nat.stx");
    expect(refetched).toBe(recording.doc.unfolded);
  });

  it("queues overlapping toggles per fragment", async () => {
    const element = statementElement();
    const first = folds.toggle(element);
    const second = folds.toggle(element);
    await Promise.all([first, second]);
    expect(element.dataset.folded).toBeUndefined(); // fold then unfold
    const posts = portal.requests.filter((r) => r.method === "POST");
    expect(posts.map((p) => (p.body as { folded: boolean }).folded)).toEqual([
      true,
      false,
    ]);
  });
});
