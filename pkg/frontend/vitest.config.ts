import { defineConfig } from "vitest/config";

// Index builds dominate: the workflow suite builds several small graphs and
// the env-gated full-scale suite builds 100k-vector ones.
export default defineConfig({
  test: {
    testTimeout: 600_000,
    hookTimeout: 600_000,
  },
});
