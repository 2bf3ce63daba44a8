import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    environment: 'node',
    include: ['tests/**/*.test.ts'],
    testTimeout: 120_000,
    hookTimeout: 120_000,
    // the integration suite walks one session through the whole campaign;
    // its tests build on each other and must run in declaration order
    sequence: { shuffle: false },
    fileParallelism: false,
  },
});
