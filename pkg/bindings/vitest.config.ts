import { defineConfig } from "vitest/config";

// Every binding call spawns the Python CLI, so individual tests can take
// a few seconds on a cold interpreter cache.
export default defineConfig({
  test: {
    testTimeout: 120_000,
  },
});
