/** Typed client for the four loopback review endpoints.
 *
 * The page holds no classification logic of its own: every document here is
 * produced by the endpoint and rendered as-is, so the browser can never show
 * a state the share would not actually use.
 */

export interface EntryLocation {
  kind: string;
  block_index: number;
  detail: unknown[];
}

export interface ReportEntry {
  entry_id: number;
  content: string;
  locations: EntryLocation[];
  f: number;
  g: number;
  p_value: number;
  public: boolean;
  override: boolean | null;
  final_public: boolean;
}

export interface Counts {
  public: number;
  personal: number;
}

export interface ReportDoc {
  script: string;
  entries: ReportEntry[];
  counts: Counts;
  confirmed: boolean;
  out_path: string;
}

export interface PreviewSlot {
  entry_id: number;
  kind: string;
  content: string;
  state: "public" | "personal";
  overridden: boolean;
}

export interface PreviewStep {
  index: number;
  kind: string;
  text: string;
  slots: PreviewSlot[];
}

export interface PreviewDoc {
  script: string;
  steps: PreviewStep[];
  parameters: string[];
  confirmed: boolean;
}

export interface ToggleResult {
  entry: {
    entry_id: number;
    content: string;
    public: boolean;
    override: boolean | null;
    final_public: boolean;
  };
  counts: Counts;
}

export interface ConfirmResult {
  shared_path: string;
  already: boolean;
  counts: Counts;
  warnings: string[];
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const res = await fetch(base + path, init);
  if (!res.ok) {
    let detail = `${res.status} from ${path}`;
    try {
      const body = (await res.json()) as { error?: string };
      if (body && typeof body.error === "string") detail = body.error;
    } catch {
      // non-JSON error body, keep the status line
    }
    throw new ApiError(res.status, detail);
  }
  return (await res.json()) as T;
}

export function fetchReport(base = ""): Promise<ReportDoc> {
  return request<ReportDoc>(base, "/api/report");
}

export function fetchPreview(base = ""): Promise<PreviewDoc> {
  return request<PreviewDoc>(base, "/api/script-preview");
}

export function postToggle(base: string, entryId: number, toPublic: boolean): Promise<ToggleResult> {
  return request<ToggleResult>(base, "/api/toggle", {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ entry_id: entryId, public: toPublic }),
  });
}

export function postConfirm(base = ""): Promise<ConfirmResult> {
  return request<ConfirmResult>(base, "/api/confirm", { method: "POST" });
}
