import { beforeEach, describe, expect, it } from "vitest";

import { HealthPane } from "../src/health.js";
import { MockApi } from "../src/mock.js";
import type { SessionInfo } from "../src/types.js";

function session(overrides: Partial<SessionInfo> = {}): SessionInfo {
  return {
    name: "PowerWorld_RTAC_560",
    outstation: 560,
    server: "127.0.0.1:20000",
    offline: false,
    message_sent_count: 10,
    message_received_count: 9,
    message_success_count: 9,
    message_failure_count: 1,
    ...overrides,
  };
}

describe("health and logs pane", () => {
  let host: HTMLElement;
  let pane: HealthPane;

  beforeEach(() => {
    document.body.innerHTML = "<div id='host'></div>";
    host = document.getElementById("host") as HTMLElement;
    pane = new HealthPane(host);
  });

  it("renders counters that advance between refreshes", () => {
    pane.renderSessions([session({ message_sent_count: 10 })]);
    let badge = host.querySelector(".badge")!;
    expect(badge.textContent).toContain("sent=10");
    expect(badge.classList.contains("online")).toBe(true);
    pane.renderSessions([session({ message_sent_count: 14, message_success_count: 12 })]);
    badge = host.querySelector(".badge")!;
    expect(badge.textContent).toContain("sent=14");
    expect(badge.textContent).toContain("ok=12");
  });

  it("flips the offline badge", () => {
    pane.renderSessions([session({ offline: true })]);
    const badge = host.querySelector(".badge")!;
    expect(badge.classList.contains("offline")).toBe(true);
    expect(badge.textContent).toContain("OFFLINE");
  });

  it("shows duplicate commands with their count", async () => {
    const api = new MockApi();
    pane.renderLogs(await api.logs());
    const item = host.querySelector("ul.command-log li")!;
    expect(item.textContent).toContain("x2");
    expect(item.textContent).toContain("BO_560_Branch_5047_5260_1_STATUS");
    expect(item.textContent).toContain("SUCCESS");
    const events = host.querySelectorAll("ul.session-events li");
    expect(events.length).toBe(1);
    expect(events[0].textContent).toContain("integrity poll ok");
  });
});
