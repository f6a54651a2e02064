import { ApiClient } from "./api";
import { LatestWins, startPolling } from "./poll";
import { loadSettings } from "./settings";
import type { ConsoleSettings } from "./settings";
import {
  mountAttendance,
  mountBots,
  mountDashboard,
  mountFeedback,
  mountSettings,
  mountSurveys,
} from "./views";
import type { Teardown, ViewContext } from "./views";

const routes: Record<string, (root: HTMLElement, ctx: ViewContext) => Teardown> = {
  "#/dashboard": mountDashboard,
  "#/attendance": mountAttendance,
  "#/surveys": mountSurveys,
  "#/feedback": mountFeedback,
  "#/bots": mountBots,
  "#/settings": mountSettings,
};

const NAV = [
  ["#/dashboard", "Dashboard"],
  ["#/attendance", "Attendance"],
  ["#/surveys", "Surveys"],
  ["#/feedback", "Feedback"],
  ["#/bots", "Bots"],
  ["#/settings", "Settings"],
] as const;

let settings: ConsoleSettings = loadSettings(localStorage);
let client: ApiClient | null = null;
let teardown: Teardown = () => {};

function rebuildClient(): void {
  client = settings.apiKey ? new ApiClient(settings.serverUrl, settings.apiKey) : null;
}
rebuildClient();

const ctx: ViewContext = {
  get client() {
    return client;
  },
  get settings() {
    return settings;
  },
  storage: localStorage,
  applySettings(next) {
    settings = next;
    rebuildClient();
  },
};

function currentHash(): string {
  const hash = location.hash || "#/dashboard";
  return hash in routes ? hash : "#/dashboard";
}

function drawNav(): void {
  const nav = document.querySelector<HTMLElement>("#nav")!;
  const active = currentHash();
  nav.innerHTML = NAV.map(
    ([href, label]) =>
      `<a href="${href}"${href === active ? ' class="active"' : ""}>${label}</a>`,
  ).join("");
}

function render(): void {
  teardown();
  drawNav();
  const root = document.querySelector<HTMLElement>("#app")!;
  root.innerHTML = "";
  const mount = routes[currentHash()]!;
  teardown = mount(root, ctx);
}

window.addEventListener("hashchange", render);
render();

// topbar badge: the health route needs no credential, so probe with a
// placeholder key even before the instructor has configured one
const badge = document.querySelector<HTMLElement>("#server-status")!;
const order = new LatestWins();
startPolling(async () => {
  const ticket = order.begin();
  const probe = client ?? new ApiClient(settings.serverUrl, "anonymous");
  try {
    await probe.request("health");
    if (!order.accept(ticket)) return;
    badge.textContent = "online";
    badge.className = "status good";
  } catch {
    if (!order.accept(ticket)) return;
    badge.textContent = "offline";
    badge.className = "status bad";
  }
}, Math.max(settings.pollIntervalMs, 1000));
