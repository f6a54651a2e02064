// Connection settings are the only thing the console keeps client-side;
// everything else is re-fetched from the API after a reload.

export interface ConsoleSettings {
  serverUrl: string;
  apiKey: string;
  pollIntervalMs: number;
}

export const DEFAULT_POLL_INTERVAL_MS = 1000;
const STORAGE_KEY = "edubot-console-settings";

interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export function loadSettings(storage: StorageLike): ConsoleSettings {
  const fallback: ConsoleSettings = {
    serverUrl: "http://127.0.0.1:8080",
    apiKey: "",
    pollIntervalMs: DEFAULT_POLL_INTERVAL_MS,
  };
  const raw = storage.getItem(STORAGE_KEY);
  if (!raw) return fallback;
  try {
    const parsed = JSON.parse(raw) as Partial<ConsoleSettings>;
    return {
      serverUrl: typeof parsed.serverUrl === "string" && parsed.serverUrl
        ? parsed.serverUrl : fallback.serverUrl,
      apiKey: typeof parsed.apiKey === "string" ? parsed.apiKey : "",
      pollIntervalMs:
        typeof parsed.pollIntervalMs === "number" && parsed.pollIntervalMs > 0
          ? parsed.pollIntervalMs : fallback.pollIntervalMs,
    };
  } catch {
    return fallback;
  }
}

export function saveSettings(storage: StorageLike, settings: ConsoleSettings): void {
  storage.setItem(STORAGE_KEY, JSON.stringify(settings));
}

/** Logout keeps the server address but forgets the credential. */
export function clearApiKey(storage: StorageLike, settings: ConsoleSettings): ConsoleSettings {
  const next = { ...settings, apiKey: "" };
  saveSettings(storage, next);
  return next;
}

/** The key is never rendered after entry; show the key id part only. */
export function maskKey(apiKey: string): string {
  if (!apiKey) return "(not set)";
  const dot = apiKey.indexOf(".");
  const keyId = dot > 0 ? apiKey.slice(0, dot) : "key";
  return `${keyId}.••••••`;
}
