// Session health badges and the command/event log pane.

import type { LogsResponse, SessionInfo } from "./types.js";

export class HealthPane {
  private badges: HTMLDivElement;
  private logList: HTMLUListElement;
  private eventList: HTMLUListElement;

  constructor(container: HTMLElement) {
    this.badges = document.createElement("div");
    this.badges.className = "health-badges";
    container.appendChild(this.badges);
    const logTitle = document.createElement("h3");
    logTitle.textContent = "command log";
    container.appendChild(logTitle);
    this.logList = document.createElement("ul");
    this.logList.className = "command-log";
    container.appendChild(this.logList);
    const eventTitle = document.createElement("h3");
    eventTitle.textContent = "session events";
    container.appendChild(eventTitle);
    this.eventList = document.createElement("ul");
    this.eventList.className = "session-events";
    container.appendChild(this.eventList);
  }

  renderSessions(sessions: SessionInfo[]): void {
    this.badges.innerHTML = "";
    for (const session of sessions) {
      const badge = document.createElement("span");
      badge.className = `badge ${session.offline ? "offline" : "online"}`;
      badge.dataset.session = session.name;
      badge.textContent =
        `${session.name} ${session.offline ? "OFFLINE" : "online"} ` +
        `sent=${session.message_sent_count} recv=${session.message_received_count} ` +
        `ok=${session.message_success_count} fail=${session.message_failure_count}`;
      this.badges.appendChild(badge);
    }
  }

  renderLogs(logs: LogsResponse): void {
    this.logList.innerHTML = "";
    for (const entry of logs.commands) {
      const item = document.createElement("li");
      item.dataset.tag = entry.tag;
      const repeat = entry.count > 1 ? ` x${entry.count}` : "";
      item.textContent =
        `${entry.wall_time} ${entry.tag} ${entry.command}${repeat} -> ${entry.outcome}`;
      this.logList.appendChild(item);
    }
    this.eventList.innerHTML = "";
    for (const event of logs.session_events) {
      const item = document.createElement("li");
      item.textContent = `${event.time} [${event.session}] ${event.message}`;
      this.eventList.appendChild(item);
    }
  }
}
