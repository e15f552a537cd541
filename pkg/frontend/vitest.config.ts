import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "happy-dom",
    include: ["test/**/*.test.ts"],
    // the parity test builds a five-user population in a child process
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
