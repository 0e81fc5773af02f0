import type {
  Hierarchy,
  Level,
  Meta,
  MomentsResponse,
  PlotMode,
  PlotPayload,
  Projection,
  SelectionResponse,
  SetOp,
  VoxelDetail,
} from "./types.js";

/** Minimal transport so tests can spy on or fake the network. */
export type Transport = (
  method: "GET" | "POST",
  path: string,
  body?: unknown,
) => Promise<{ status: number; json: unknown }>;

export function fetchTransport(baseUrl: string): Transport {
  return async (method, path, body) => {
    const res = await fetch(baseUrl + path, {
      method,
      headers: body !== undefined ? { "content-type": "application/json" } : {},
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    return { status: res.status, json: await res.json() };
  };
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

function qs(params: Record<string, string | number | boolean | undefined>): string {
  const parts = Object.entries(params)
    .filter(([, v]) => v !== undefined)
    .map(([k, v]) => `${encodeURIComponent(k)}=${encodeURIComponent(String(v))}`);
  return parts.length ? `?${parts.join("&")}` : "";
}

export interface PlotRequest {
  mode?: PlotMode;
  x?: string;
  y?: string;
  z?: string;
  zooming?: boolean;
  bins?: number;
}

/** Typed client over the exploration API; one instance per session. */
export class ApiClient {
  constructor(
    private transport: Transport,
    public session = "default",
  ) {}

  private async call<T>(method: "GET" | "POST", path: string, body?: unknown): Promise<T> {
    const sep = path.includes("?") ? "&" : "?";
    const { status, json } = await this.transport(
      method,
      `${path}${sep}session=${encodeURIComponent(this.session)}`,
      body,
    );
    if (status >= 400) {
      const err = json as { code?: string; message?: string };
      throw new ApiError(status, err.code ?? "error", err.message ?? `HTTP ${status}`);
    }
    return json as T;
  }

  meta(): Promise<Meta> {
    return this.call("GET", "/meta");
  }

  hierarchy(metricX?: string, metricY?: string, moment = "mu_22"): Promise<Hierarchy> {
    return this.call(
      "GET",
      `/hierarchy${qs({ metric_x: metricX, metric_y: metricY, moment })}`,
    );
  }

  projection(
    level: Level,
    opts: { method?: string; metric?: string; x?: string; y?: string; seed?: number } = {},
  ): Promise<Projection> {
    return this.call("GET", `/projection/${level}${qs(opts)}`);
  }

  select(level: Level, ids: number[], op: SetOp): Promise<SelectionResponse> {
    return this.call("POST", `/selection/${level}`, { ids, op });
  }

  plot(req: PlotRequest = {}): Promise<PlotPayload> {
    return this.call("GET", `/plot${qs({ ...req })}`);
  }

  plotConfig(cfg: {
    mode?: string;
    x?: string;
    y?: string;
    x_range?: number[];
    y_range?: number[];
    locked?: boolean;
    bins?: number;
    k?: number;
  }): Promise<unknown> {
    return this.call("POST", "/plot/config", cfg);
  }

  moments(model: string, opts: { x?: string; y?: string; k?: number; bins?: number } = {}): Promise<MomentsResponse> {
    return this.call("GET", `/moments${qs({ model, ...opts })}`);
  }

  voxels(limit = 5000): Promise<{ n: number; voxels: VoxelDetail[] }> {
    return this.call("GET", `/voxels${qs({ limit })}`);
  }

  newSession(): Promise<{ token: string }> {
    return this.call("POST", "/session");
  }
}
