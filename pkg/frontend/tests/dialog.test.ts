import { beforeEach, describe, expect, it } from "vitest";

import { ControlDialog } from "../src/dialog.js";
import { MockApi, FIXTURE_TAGS } from "../src/mock.js";
import type { ApiTagView } from "../src/types.js";

function fixture(name: string): ApiTagView {
  const view = FIXTURE_TAGS.find((t) => t.name === name);
  if (!view) throw new Error(name);
  return view;
}

function click(root: HTMLElement, selector: string): void {
  const el = root.querySelector(selector) as HTMLElement | null;
  if (!el) throw new Error(`missing ${selector}`);
  el.click();
}

describe("control dialog", () => {
  let host: HTMLElement;
  let api: MockApi;
  let dialog: ControlDialog;
  let results: { message: string; ok: boolean }[];

  beforeEach(() => {
    document.body.innerHTML = "<div id='host'></div>";
    host = document.getElementById("host") as HTMLElement;
    api = new MockApi();
    results = [];
    dialog = new ControlDialog(host, api, (message, ok) => results.push({ message, ok }));
  });

  it("posts the exact JSON for latch_off after the confirm step", async () => {
    dialog.openFor(fixture("BO_560_Branch_5047_5260_1_STATUS"));
    click(host, ".action-latch_off");
    // confirm step echoes target and action before anything is sent
    const echo = host.querySelector(".confirm-echo")!.textContent!;
    expect(echo).toContain("latch_off");
    expect(echo).toContain("BO_560_Branch_5047_5260_1_STATUS");
    expect(api.controls).toEqual([]);
    click(host, ".confirm-send");
    await Promise.resolve();
    expect(api.controls).toEqual([
      {
        tag: "BO_560_Branch_5047_5260_1_STATUS",
        action: "latch_off",
        mode: "direct",
      },
    ]);
    await Promise.resolve();
    expect(results).toEqual([
      { message: "BO_560_Branch_5047_5260_1_STATUS: SUCCESS", ok: true },
    ]);
  });

  it("posts the exact JSON for analog 1000.0", async () => {
    dialog.openFor(fixture("AO_560_Generator_5262_1_MWSETPOINT"));
    const input = host.querySelector("input.analog-value") as HTMLInputElement;
    input.value = "1000";
    click(host, ".action-analog");
    click(host, ".confirm-send");
    await Promise.resolve();
    expect(api.controls).toEqual([
      {
        tag: "AO_560_Generator_5262_1_MWSETPOINT",
        action: "analog",
        value: 1000,
        mode: "direct",
      },
    ]);
  });

  it("cancel sends nothing", () => {
    dialog.openFor(fixture("BO_560_Branch_5047_5260_1_STATUS"));
    click(host, ".action-latch_off");
    click(host, ".cancel");
    expect(api.controls).toEqual([]);
    expect(dialog.visible).toBe(false);
  });

  it("renders API errors verbatim", async () => {
    api.control = () =>
      Promise.reject(
        new (class extends Error {
          status = 409;
          constructor() {
            super("409: session PowerWorld_RTAC_560 is offline");
          }
        })(),
      );
    dialog.openFor(fixture("BO_560_Branch_5047_5260_1_STATUS"));
    click(host, ".action-latch_on");
    click(host, ".confirm-send");
    await Promise.resolve();
    await Promise.resolve();
    expect(results.length).toBe(1);
    expect(results[0].ok).toBe(false);
    expect(results[0].message).toContain("409: session PowerWorld_RTAC_560 is offline");
  });
});
