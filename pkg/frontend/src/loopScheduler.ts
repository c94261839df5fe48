/**
 * Loop playback planning for one music segment.
 *
 * The server sends each segment as a single clip plus loop parameters; the
 * client decodes the clip once and schedules it `loop_count` times.  The plan
 * keeps every full loop on the exact grid (loop i starts at i * clip), so
 * consecutive loops are seam-gap-free by construction.  Crossfading is done
 * with a short "preview" entry per interior seam: during the crossfade window
 * before each boundary the outgoing loop fades out while a preview of the
 * incoming clip's head fades in on top, which reproduces the server's own
 * loop rendering sample for sample.
 */

export class LoopPlanError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "LoopPlanError";
  }
}

export interface SegmentPlaybackInfo {
  windowStartS: number; // session time where the window opens
  windowEndS: number; // session time where the window closes (half-open)
  loopCount: number;
  crossfadeMs: number;
  offsetS: number; // window-relative position to begin playback at
  clipDurationS: number; // from the decoded clip
}

export interface ScheduledEntry {
  kind: "loop" | "preview";
  loopIndex: number;
  startS: number; // window-relative
  endS: number;
  sourceOffsetS: number; // read position within the clip
  fadeInS: number;
  fadeOutS: number;
}

export interface LoopPlan {
  loops: ScheduledEntry[]; // grid-aligned full loops, in order
  previews: ScheduledEntry[]; // crossfade head previews, one per interior seam
  seamGapsS: number[]; // start(next) - end(prev) for consecutive loops
  maxSeamGapS: number;
  coverageStartS: number;
  coverageEndS: number;
}

const EPSILON_S = 1e-9;

/** Build the playback plan for a segment; throws when the numbers cannot tile the window. */
export function buildLoopPlan(info: SegmentPlaybackInfo): LoopPlan {
  const windowS = info.windowEndS - info.windowStartS;
  const clipS = info.clipDurationS;
  if (windowS <= 0) throw new LoopPlanError(`window length must be positive, got ${windowS}s`);
  if (clipS <= 0) throw new LoopPlanError(`clip duration must be positive, got ${clipS}s`);
  if (info.loopCount < 1) throw new LoopPlanError(`loop count must be >= 1, got ${info.loopCount}`);
  if (info.offsetS < 0 || info.offsetS >= windowS) {
    throw new LoopPlanError(`offset ${info.offsetS}s outside the ${windowS}s window`);
  }
  const finalS = windowS - (info.loopCount - 1) * clipS;
  if (finalS <= EPSILON_S || finalS > clipS + EPSILON_S) {
    throw new LoopPlanError(
      `${info.loopCount} loops of a ${clipS}s clip cannot tile a ${windowS}s window`,
    );
  }
  const crossfadeS = Math.min(Math.max(info.crossfadeMs, 0) / 1000, clipS);

  const loops: ScheduledEntry[] = [];
  const previews: ScheduledEntry[] = [];
  for (let i = 0; i < info.loopCount; i++) {
    const gridStart = i * clipS;
    const gridEnd = Math.min(gridStart + clipS, windowS);
    if (gridEnd - EPSILON_S <= info.offsetS) continue; // entirely before the join point
    const startS = Math.max(gridStart, info.offsetS);
    const bodyS = gridEnd - startS;
    loops.push({
      kind: "loop",
      loopIndex: i,
      startS,
      endS: gridEnd,
      sourceOffsetS: startS - gridStart,
      fadeInS: 0,
      fadeOutS: Math.min(crossfadeS, bodyS),
    });
    if (crossfadeS > 0 && i > 0 && gridStart - crossfadeS >= info.offsetS - EPSILON_S) {
      // head preview riding the previous loop's fade-out; a seam the join
      // offset cuts into plays without its preview rather than before it
      previews.push({
        kind: "preview",
        loopIndex: i,
        startS: gridStart - crossfadeS,
        endS: gridStart,
        sourceOffsetS: 0,
        fadeInS: crossfadeS,
        fadeOutS: 0,
      });
    }
  }

  const seamGapsS: number[] = [];
  for (let i = 1; i < loops.length; i++) {
    seamGapsS.push(loops[i].startS - loops[i - 1].endS);
  }
  return {
    loops,
    previews,
    seamGapsS,
    maxSeamGapS: seamGapsS.length ? Math.max(...seamGapsS) : 0,
    coverageStartS: loops[0].startS,
    coverageEndS: loops[loops.length - 1].endS,
  };
}
