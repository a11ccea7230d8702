import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    testTimeout: 600_000,
    hookTimeout: 600_000,
    // training tests share on-disk fixtures built once in globalSetup
    globalSetup: "./tests/setup.ts",
    pool: "forks",
    maxWorkers: 1,
    fileParallelism: false,
  },
});
