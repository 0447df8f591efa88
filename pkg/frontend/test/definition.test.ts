import { beforeEach, describe, expect, it } from "vitest";

import { PortalClient } from "../src/api.js";
import { DefinitionPopup } from "../src/definition.js";
import { FakePortal, mountDocument, recording } from "./helpers.js";

const SYMBOL = "//nat#nat/plus";

describe("definition popup", () => {
  let popup: DefinitionPopup;

  beforeEach(() => {
    new FakePortal().install();
    mountDocument();
    popup = new DefinitionPopup(new PortalClient());
  });

  it("popup body equals the /definition response", async () => {
    await popup.show(SYMBOL);
    expect(popup.bodyHtml()).toBe(recording.definition[SYMBOL]);
  });

  it("anchors next to the requesting element and can be dismissed", async () => {
    const element = document.querySelector("[data-symbol]") as HTMLElement;
    await popup.show(SYMBOL, element);
    expect(popup.visible).toBe(true);
    const node = document.querySelector(".sp-definition-popup") as HTMLElement;
    expect(node.dataset.symbol).toBe(SYMBOL);
    (node.querySelector(".sp-popup-close") as HTMLButtonElement).click();
    expect(popup.visible).toBe(false);
    expect(document.querySelector(".sp-definition-popup")).toBeNull();
  });

  it("renders an inline message for unknown symbols", async () => {
    await popup.show("//nat#nat/unknown");
    expect(document.querySelector(".sp-popup-error")).not.toBeNull();
    expect(popup.bodyHtml()).toContain("no definition available");
  });
});
