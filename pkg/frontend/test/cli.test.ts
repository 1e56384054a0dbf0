import { execFileSync } from "node:child_process";
import { existsSync, mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterEach, describe, expect, it, vi } from "vitest";

import { main } from "../src/cli.js";

const FIXTURES = join(__dirname, "fixtures");

function tmpOut(name: string): string {
  return join(mkdtempSync(join(tmpdir(), "figures-")), name);
}

afterEach(() => {
  vi.restoreAllMocks();
});

function quiet() {
  vi.spyOn(console, "error").mockImplementation(() => {});
  vi.spyOn(console, "log").mockImplementation(() => {});
}

describe("cli main", () => {
  it("renders both main figure kinds from engine-produced CSVs", () => {
    quiet();
    for (const [kind, fixture] of [
      ["shots_sweep", "sweep.csv"],
      ["method_compare", "compare.csv"],
    ] as const) {
      const out = tmpOut(`${kind}.svg`);
      const code = main(["--in", join(FIXTURES, fixture), "--out", out, "--kind", kind]);
      expect(code).toBe(0);
      expect(existsSync(out)).toBe(true);
      expect(readFileSync(out, "utf-8")).toContain("<svg");
    }
  });

  it("renders the grid kind", () => {
    quiet();
    const out = tmpOut("grid.svg");
    expect(main(["--in", join(FIXTURES, "grid.csv"), "--out", out, "--kind", "grid"])).toBe(0);
    expect(readFileSync(out, "utf-8")).toContain("ε");
  });

  it("fails clearly on a schema mismatch, naming the column", () => {
    const errors: string[] = [];
    vi.spyOn(console, "error").mockImplementation((msg) => errors.push(String(msg)));
    const broken = tmpOut("broken.csv");
    const text = readFileSync(join(FIXTURES, "sweep.csv"), "utf-8");
    writeFileSync(broken, text.replace("refresh_count", "refreshes"));
    const code = main(["--in", broken, "--out", tmpOut("x.svg"), "--kind", "shots_sweep"]);
    expect(code).toBe(2);
    expect(errors.join("\n")).toContain('"refresh_count"');
  });

  it("fails on a single-shot sweep with a clear message", () => {
    const errors: string[] = [];
    vi.spyOn(console, "error").mockImplementation((msg) => errors.push(String(msg)));
    const single = tmpOut("single.csv");
    const lines = readFileSync(join(FIXTURES, "sweep.csv"), "utf-8").trimEnd().split("\n");
    writeFileSync(single, lines.slice(0, 2).join("\n") + "\n");
    const code = main(["--in", single, "--out", tmpOut("x.svg"), "--kind", "shots_sweep"]);
    expect(code).toBe(2);
    expect(errors.join("\n")).toMatch(/>= 2 shot values/);
  });

  it("rejects unknown kinds and missing flags", () => {
    quiet();
    expect(main(["--in", "a", "--out", "b", "--kind", "pie"])).toBe(2);
    expect(main(["--in", "a"])).toBe(2);
    expect(main(["--frobnicate"])).toBe(2);
  });

  it("regenerates a CSV with the engine when available and renders it", () => {
    quiet();
    const csv = tmpOut("fresh.csv");
    try {
      execFileSync(
        "python3",
        ["-m", "deskdlm.cli", "bench", "--sweep", "shots=1,2", "--layers", "1",
         "--dim", "32", "--heads", "2", "--gen-len", "16", "--block-size", "8",
         "--example-len", "24", "--repeats", "1", "--out-csv", csv],
        { stdio: "pipe", timeout: 120_000 },
      );
    } catch {
      return; // engine not installed in this environment; fixtures cover the contract
    }
    const out = tmpOut("fresh.svg");
    expect(main(["--in", csv, "--out", out, "--kind", "shots_sweep"])).toBe(0);
    expect(readFileSync(out, "utf-8")).toContain("spearman");
  });
});
