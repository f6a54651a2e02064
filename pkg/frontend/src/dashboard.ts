// Dashboard state, DOM-free for testing. The header mirrors the service
// health probe; the action list groups every console command by category.

export interface BotSummary {
  id: string;
  name: string;
  state: string;
  mode: string;
}

export interface PresenceCounts {
  online: number;
  offline: number;
  total: number;
}

export interface DashboardState {
  reachable: boolean | null; // null until the first probe settles
  checkedAt: string;
  uptimeS: number | null;
  bots: BotSummary[];
  presence: PresenceCounts | null;
}

export function initialDashboard(): DashboardState {
  return { reachable: null, checkedAt: "", uptimeS: null, bots: [], presence: null };
}

export function applyHealth(
  state: DashboardState,
  data: { uptime_s: number; bots: BotSummary[]; time: string },
): void {
  state.reachable = true;
  state.checkedAt = data.time;
  state.uptimeS = data.uptime_s;
  state.bots = data.bots;
}

export function applyPresence(state: DashboardState, counts: PresenceCounts): void {
  state.presence = counts;
}

export function markUnreachable(state: DashboardState): void {
  state.reachable = false;
  state.presence = null;
}

export interface PresencePanel {
  label: string;
  value: string;
}

export function presencePanels(presence: PresenceCounts | null): PresencePanel[] {
  return [
    { label: "Online", value: presence ? String(presence.online) : "-" },
    { label: "Offline", value: presence ? String(presence.offline) : "-" },
    { label: "Total", value: presence ? String(presence.total) : "-" },
  ];
}

/** Command groups shown on the landing screen; hrefs are console routes. */
export const COMMAND_CATEGORIES: ReadonlyArray<{
  label: string;
  actions: ReadonlyArray<{ label: string; href: string }>;
}> = [
  {
    label: "Simple commands",
    actions: [{ label: "Ping", href: "#/dashboard" }],
  },
  {
    label: "Member commands",
    actions: [
      { label: "Give role", href: "#/dashboard" },
      { label: "Presence", href: "#/dashboard" },
    ],
  },
  {
    label: "Channel commands",
    actions: [
      { label: "Send message", href: "#/dashboard" },
      { label: "Clear messages", href: "#/dashboard" },
    ],
  },
  {
    label: "Group commands",
    actions: [{ label: "Attendance", href: "#/attendance" }],
  },
  {
    label: "Survey commands",
    actions: [
      { label: "Surveys", href: "#/surveys" },
      { label: "Feedback", href: "#/feedback" },
    ],
  },
];
