import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import net from "node:net";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

const HERE = dirname(fileURLToPath(import.meta.url));

export function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const server = net.createServer();
    server.on("error", reject);
    server.listen(0, "127.0.0.1", () => {
      const port = (server.address() as net.AddressInfo).port;
      server.close(() => resolve(port));
    });
  });
}

export interface ServiceHandle {
  base: string;
  bundleDir: string;
  proc: ChildProcess;
  stop(): void;
}

/** Seed a bundle directory and run the real session service on a free port. */
export async function startService(): Promise<ServiceHandle> {
  const workDir = mkdtempSync(join(tmpdir(), "walk-studio-"));
  const bundleDir = join(workDir, "bundles");
  execFileSync("python3", [join(HERE, "make_bundle.py"), bundleDir]);
  const port = await freePort();
  const code = [
    "import uvicorn",
    "from trailer_walk.config import ServiceConfig, default_config",
    "from trailer_walk.service import create_app",
    `app = create_app(ServiceConfig(port=${port}, bundle_dir=${JSON.stringify(bundleDir)}, engine=default_config()))`,
    `uvicorn.run(app, host="127.0.0.1", port=${port}, log_level="warning")`,
  ].join("\n");
  const proc = spawn("python3", ["-c", code], { stdio: ["ignore", "pipe", "pipe"] });
  let stderr = "";
  proc.stderr?.on("data", (chunk) => {
    stderr += String(chunk);
  });
  const base = `http://127.0.0.1:${port}`;
  const handle: ServiceHandle = {
    base,
    bundleDir,
    proc,
    stop() {
      proc.kill();
      rmSync(workDir, { recursive: true, force: true });
    },
  };
  const deadline = Date.now() + 60_000;
  while (Date.now() < deadline) {
    if (proc.exitCode !== null) break;
    try {
      const response = await fetch(`${base}/movies`);
      if (response.ok) return handle;
    } catch {
      // not listening yet
    }
    await new Promise((resolve) => setTimeout(resolve, 150));
  }
  proc.kill();
  throw new Error(`session service did not come up on ${base}\n${stderr}`);
}

export interface BatchProposal {
  start: number;
  shots: number[];
  steps: { shot: number }[];
  flow_realized: number[];
  tps_covered: number[];
  terminated: string;
  duplicate_of: number | null;
  mean_score?: number;
}

export interface BatchReport {
  movie_id: string;
  budget: number;
  flow_target: number[];
  seed: number;
  proposals: BatchProposal[];
}

/** Run the batch CLI on a bundle and parse its proposal report. */
export function runBatchGenerate(bundlePath: string, movieId: string): BatchReport {
  const outDir = mkdtempSync(join(tmpdir(), "walk-studio-batch-"));
  try {
    execFileSync("trailer-walk", ["generate", bundlePath, "--out-dir", outDir], {
      stdio: "pipe",
    });
    const raw = readFileSync(join(outDir, `${movieId}-proposals.json`), "utf8");
    return JSON.parse(raw) as BatchReport;
  } finally {
    rmSync(outDir, { recursive: true, force: true });
  }
}
