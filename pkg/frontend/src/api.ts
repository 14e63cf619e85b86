/** Typed client for the /v1 grading service. All numbers displayed by the
 *  UI come from these responses; the client never post-processes grades. */

import type {
  ClassifyPreview,
  ExamMetadata,
  GradeProgress,
  GradeRunResult,
  Rect,
  ReviewItem,
  ServiceError,
  SheetGradePayload,
} from './types.js';

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly errorName: string,
    message: string,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function parseJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let payload: ServiceError = { error: 'HttpError', message: response.statusText };
    try {
      payload = (await response.json()) as ServiceError;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, payload.error, payload.message);
  }
  return (await response.json()) as T;
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private url(path: string): string {
    return `${this.baseUrl}/v1${path}`;
  }

  private get<T>(path: string): Promise<T> {
    return this.fetchImpl(this.url(path)).then((r) => parseJson<T>(r));
  }

  private send<T>(method: string, path: string, body: unknown): Promise<T> {
    return this.fetchImpl(this.url(path), {
      method,
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    }).then((r) => parseJson<T>(r));
  }

  listSheets(): Promise<string[]> {
    return this.get<{ sheets: string[] }>('/sheets').then((r) => r.sheets);
  }

  /** URL of the raw or registered PNG for an <img> tag. */
  sheetImageUrl(name: string, registered: boolean): string {
    return this.url(`/sheets/${encodeURIComponent(name)}?registered=${registered}`);
  }

  referenceImageUrl(): string {
    return this.url('/reference');
  }

  getMetadata(): Promise<ExamMetadata> {
    return this.get<ExamMetadata>('/metadata');
  }

  putMetadata(metadata: ExamMetadata): Promise<ExamMetadata> {
    return this.send<ExamMetadata>('PUT', '/metadata', metadata);
  }

  classifyPreview(image: string, rect: Rect, strategy: string): Promise<ClassifyPreview> {
    return this.send<ClassifyPreview>('POST', '/classify-preview', {
      image,
      rect,
      strategy,
    });
  }

  grade(strategy: string, sheets?: string[]): Promise<GradeRunResult> {
    return this.send<GradeRunResult>('POST', '/grade', { strategy, sheets });
  }

  gradeStatus(): Promise<GradeProgress> {
    return this.get<GradeProgress>('/grade/status');
  }

  getGrade(sheet: string): Promise<SheetGradePayload> {
    return this.get<SheetGradePayload>(`/grades/${encodeURIComponent(sheet)}`);
  }

  reviewQueue(): Promise<ReviewItem[]> {
    return this.get<{ items: ReviewItem[] }>('/review-queue').then((r) => r.items);
  }

  override(
    sheet: string,
    question: number,
    choice: number,
    label: number,
  ): Promise<SheetGradePayload> {
    return this.send<SheetGradePayload>('POST', '/override', {
      sheet,
      question,
      choice,
      label,
    });
  }
}
