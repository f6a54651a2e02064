import { describe, expect, it } from "vitest";

import {
  clearApiKey,
  loadSettings,
  maskKey,
  saveSettings,
} from "../src/settings";

function memoryStorage() {
  const map = new Map<string, string>();
  return {
    getItem: (key: string) => map.get(key) ?? null,
    setItem: (key: string, value: string) => void map.set(key, value),
    removeItem: (key: string) => void map.delete(key),
  };
}

describe("console settings", () => {
  it("round-trips through storage", () => {
    const storage = memoryStorage();
    const settings = {
      serverUrl: "http://box:9000", apiKey: "k1.s3cret", pollIntervalMs: 2000,
    };
    saveSettings(storage, settings);
    expect(loadSettings(storage)).toEqual(settings);
  });

  it("falls back to defaults when storage is empty or corrupt", () => {
    expect(loadSettings(memoryStorage()).pollIntervalMs).toBe(1000);
    const storage = memoryStorage();
    storage.setItem("edubot-console-settings", "{nope");
    const loaded = loadSettings(storage);
    expect(loaded.apiKey).toBe("");
    expect(loaded.serverUrl).toContain("http");
  });

  it("logout clears only the credential", () => {
    const storage = memoryStorage();
    const settings = {
      serverUrl: "http://box:9000", apiKey: "k1.s3cret", pollIntervalMs: 500,
    };
    saveSettings(storage, settings);
    const next = clearApiKey(storage, settings);
    expect(next.apiKey).toBe("");
    expect(next.serverUrl).toBe("http://box:9000");
    expect(loadSettings(storage).apiKey).toBe("");
    expect(loadSettings(storage).pollIntervalMs).toBe(500);
  });

  it("never shows the secret half of a key", () => {
    const masked = maskKey("k1a2b3c4.super-secret-part");
    expect(masked).toContain("k1a2b3c4");
    expect(masked).not.toContain("super-secret-part");
    expect(maskKey("")).toBe("(not set)");
  });
});
