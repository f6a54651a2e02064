// The only module that talks to the network. Every request the console can
// make goes through request(), and every route it may hit is listed in
// ROUTES; tests/routes.test.ts checks that list against the server docs.

export interface Envelope<T = unknown> {
  status: "success" | "error";
  message: string;
  data?: T;
}

export class ApiError extends Error {
  constructor(readonly httpStatus: number, message: string) {
    super(message);
  }
}

export interface Route {
  method: "GET" | "POST" | "DELETE";
  path: string; // documented template, {id} for the one path parameter
}

export const ROUTES = {
  health: { method: "GET", path: "/api/health" },
  attendance: { method: "POST", path: "/api/attendance" },
  listSessions: { method: "GET", path: "/api/attendance/sessions" },
  getSession: { method: "GET", path: "/api/attendance/sessions/{id}" },
  createSimpleSurvey: { method: "POST", path: "/api/surveys/simple" },
  createComplexSurvey: { method: "POST", path: "/api/surveys/complex" },
  listSurveys: { method: "GET", path: "/api/surveys" },
  surveyResults: { method: "GET", path: "/api/surveys/{id}/results" },
  startFeedback: { method: "POST", path: "/api/feedback" },
  listFeedback: { method: "GET", path: "/api/feedback" },
  feedbackResults: { method: "GET", path: "/api/feedback/{id}/results" },
  listBots: { method: "GET", path: "/api/bots" },
  createBot: { method: "POST", path: "/api/bots" },
  startBot: { method: "POST", path: "/api/bots/{id}/start" },
  stopBot: { method: "POST", path: "/api/bots/{id}/stop" },
  deleteBot: { method: "DELETE", path: "/api/bots/{id}" },
  ping: { method: "POST", path: "/api/commands/ping" },
  sendMessage: { method: "POST", path: "/api/commands/send-message" },
  giveRole: { method: "POST", path: "/api/commands/give-role" },
  clearMessages: { method: "POST", path: "/api/commands/clear-messages" },
  presence: { method: "GET", path: "/api/presence" },
} as const satisfies Record<string, Route>;

export type RouteName = keyof typeof ROUTES;

export interface RequestOptions {
  id?: string;
  query?: Record<string, string>;
  body?: unknown;
}

type FetchLike = (url: string, init: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly serverUrl: string,
    private readonly apiKey: string,
    private readonly fetchImpl: FetchLike = (u, i) => fetch(u, i),
  ) {}

  async request<T = unknown>(
    name: RouteName,
    options: RequestOptions = {},
  ): Promise<Envelope<T>> {
    const route = ROUTES[name];
    let path: string = route.path;
    if (path.includes("{id}")) {
      if (!options.id) throw new Error(`route ${name} needs an id`);
      path = path.replace("{id}", encodeURIComponent(options.id));
    }
    let url = this.serverUrl.replace(/\/$/, "") + path;
    if (options.query && Object.keys(options.query).length > 0) {
      url += "?" + new URLSearchParams(options.query).toString();
    }
    const init: RequestInit = {
      method: route.method,
      headers: { Authorization: `Bearer ${this.apiKey}` },
    };
    if (options.body !== undefined) {
      init.headers = { ...init.headers, "Content-Type": "application/json" };
      init.body = JSON.stringify(options.body);
    }
    const response = await this.fetchImpl(url, init);
    let envelope: Envelope<T>;
    try {
      envelope = (await response.json()) as Envelope<T>;
    } catch {
      throw new ApiError(response.status, `unexpected reply (HTTP ${response.status})`);
    }
    if (!response.ok || envelope.status !== "success") {
      throw new ApiError(response.status, envelope.message);
    }
    return envelope;
  }
}
