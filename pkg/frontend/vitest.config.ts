import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    // live.test.ts spawns the Python control server and runs a full
    // operator arc against it, so both budgets are generous.
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
