import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "happy-dom",
    include: ["test/**/*.test.ts"],
    // acceptance tests spawn a real server process and wait for it
    testTimeout: 60_000,
    hookTimeout: 60_000,
  },
});
