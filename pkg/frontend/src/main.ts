/** Browser entry point: wires the annotation canvas, metadata panel,
 *  grading controls, and the keyboard-first review loop to the session. */

import { ApiClient, ApiError } from './api.js';
import { AnnotationSession } from './session.js';
import {
  colorForQuestion,
  dragToRect,
  drawBox,
  drawLabel,
  toImageCoords,
  type Point,
} from './canvas.js';
import { CLASS_LABELS, CONFIRMED, CROSSED_OUT, EMPTY, type AnswerClass } from './types.js';

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function showError(err: unknown): void {
  const box = el<HTMLDivElement>('errors');
  if (err instanceof ApiError) {
    box.textContent = `${err.errorName}: ${err.message}`;
  } else {
    box.textContent = String(err);
  }
}

async function start(): Promise<void> {
  const api = new ApiClient('');
  const session = await AnnotationSession.load(api);

  const image = el<HTMLImageElement>('reference');
  const canvas = el<HTMLCanvasElement>('overlay');
  const ctx = canvas.getContext('2d');
  if (!ctx) {
    throw new Error('canvas unavailable');
  }
  image.src = api.referenceImageUrl();

  let scale = 1;
  let dragStart: Point | null = null;

  function redraw(): void {
    canvas.width = image.clientWidth;
    canvas.height = image.clientHeight;
    scale = image.clientWidth / Math.max(image.naturalWidth, 1);
    ctx!.clearRect(0, 0, canvas.width, canvas.height);
    for (const q of session.metadata.questions) {
      const color = colorForQuestion(q.questionIndex);
      q.questionRect.forEach((rect, choice) => {
        const isKey = choice === q.questionAnswer;
        drawBox(ctx!, rect, { stroke: color, lineWidth: isKey ? 3 : 1 }, scale);
        drawLabel(ctx!, rect, `${q.questionIndex}.${choice}${isKey ? '*' : ''}`, color, scale);
      });
    }
    el<HTMLSpanElement>('dirty').textContent = session.dirty ? 'unsaved changes' : '';
    const problems = session.validate();
    el<HTMLDivElement>('problems').textContent = problems.join('\n');
  }

  image.addEventListener('load', redraw);

  canvas.addEventListener('mousedown', (ev) => {
    const bounds = canvas.getBoundingClientRect();
    dragStart = toImageCoords(ev.clientX, ev.clientY, bounds, scale);
  });

  canvas.addEventListener('mouseup', (ev) => {
    if (!dragStart) {
      return;
    }
    const bounds = canvas.getBoundingClientRect();
    const end = toImageCoords(ev.clientX, ev.clientY, bounds, scale);
    const rect = dragToRect(dragStart, end);
    dragStart = null;
    const question = Number(el<HTMLInputElement>('question-index').value);
    const result = session.drawRoi(question, rect);
    const badge = el<HTMLSpanElement>('overlap-warning');
    if (!result.added) {
      badge.textContent = result.reason ?? 'rejected';
    } else if (result.overlaps.length > 0) {
      badge.textContent = `overlaps choice(s) ${result.overlaps.join(', ')}`;
    } else {
      badge.textContent = '';
    }
    redraw();
  });

  el<HTMLButtonElement>('add-question').addEventListener('click', () => {
    const q = session.addQuestion();
    el<HTMLInputElement>('question-index').value = String(q.questionIndex);
    redraw();
  });

  el<HTMLButtonElement>('save').addEventListener('click', async () => {
    try {
      await session.save();
      redraw();
    } catch (err) {
      showError(err);
    }
  });

  el<HTMLButtonElement>('discard').addEventListener('click', () => {
    session.discard();
    redraw();
  });

  function renderGrades(): void {
    const list = el<HTMLUListElement>('grades');
    list.textContent = '';
    for (const [sheet, grade] of session.grades) {
      const item = document.createElement('li');
      // displayed totals are the server's rendering, verbatim
      item.textContent = `${sheet}: ${grade.display_total}`;
      list.appendChild(item);
    }
  }

  function renderReview(): void {
    const item = session.currentReviewItem();
    const panel = el<HTMLDivElement>('review-item');
    if (!item) {
      panel.textContent = 'review queue empty';
      return;
    }
    const classes = item.choice_classes
      .map((c, i) => `${i}:${CLASS_LABELS[c as AnswerClass]}(${item.choice_confidences[i].toFixed(2)})`)
      .join('  ');
    panel.textContent =
      `${item.sheet} question ${item.question_index} — ${classes}\n` +
      `[c] confirm  [x] cross out  [e] empty  [n] next`;
  }

  el<HTMLButtonElement>('grade').addEventListener('click', async () => {
    try {
      const strategy = el<HTMLInputElement>('strategy').value;
      await session.grade(strategy);
      renderGrades();
      renderReview();
    } catch (err) {
      showError(err);
    }
  });

  document.addEventListener('keydown', async (ev) => {
    const item = session.currentReviewItem();
    if (!item) {
      return;
    }
    const byKey: Record<string, AnswerClass> = {
      c: CONFIRMED,
      x: CROSSED_OUT,
      e: EMPTY,
    };
    try {
      if (ev.key === 'n') {
        session.nextReviewItem();
        renderReview();
      } else if (ev.key in byKey) {
        const choice = Number(el<HTMLInputElement>('review-choice').value);
        await session.overrideBox(item.sheet, item.question_index, choice, byKey[ev.key]);
        renderGrades();
        renderReview();
      }
    } catch (err) {
      showError(err);
    }
  });

  redraw();
}

start().catch(showError);
