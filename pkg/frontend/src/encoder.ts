/**
 * Sequence assembly and token encoders.
 *
 * Every example becomes [CLS] + sentence + [SEP] + aspect + [SEP].  When the
 * assembled length exceeds the encoder budget, sentence tokens are cut;
 * aspect tokens and the special slots never are.
 *
 * Two encoders: a deterministic hash encoder (any width, no model files,
 * used for dependency-free runs and tests) and a frozen pretrained
 * transformer loaded from a local directory (width 768, last-layer token
 * states, sentence/aspect segment ids).
 */

import { createHash } from 'node:crypto';

import { EncoderError } from './types.js';

export const CLS = '[CLS]';
export const SEP = '[SEP]';

export interface EncodedSequence {
  /** row-major (seqLen x width) */
  values: Float32Array;
  seqLen: number;
  truncated: boolean;
}

export interface Encoder {
  readonly width: number;
  readonly name: string;
  encode(sentence: string, aspect: string): Promise<EncodedSequence>;
}

export function assembleTokens(
  sentence: string,
  aspect: string,
  maxLen: number,
): { tokens: string[]; truncated: boolean } {
  const sentenceTokens = sentence.split(/\s+/).filter(Boolean);
  const aspectTokens = aspect.split(/\s+/).filter(Boolean);
  const overhead = 3 + aspectTokens.length; // CLS + two SEPs + aspect
  let kept = sentenceTokens;
  let truncated = false;
  if (overhead + sentenceTokens.length > maxLen) {
    const budget = maxLen - overhead;
    if (budget < 0) {
      throw new EncoderError(
        `aspect "${aspect}" alone exceeds the length budget ${maxLen}`);
    }
    kept = sentenceTokens.slice(0, budget);
    truncated = true;
  }
  return { tokens: [CLS, ...kept, SEP, ...aspectTokens, SEP], truncated };
}

/** Deterministic per-token vectors in [-1, 1], keyed by (token, seed). */
export class HashEncoder implements Encoder {
  readonly width: number;
  readonly name: string;
  private readonly seed: number;
  private readonly maxLen: number;
  private readonly cache = new Map<string, Float32Array>();

  constructor(width = 768, seed = 0, maxLen = 128) {
    if (width < 1) throw new EncoderError(`width must be >= 1, got ${width}`);
    this.width = width;
    this.seed = seed;
    this.maxLen = maxLen;
    this.name = `hash:${width}`;
  }

  private tokenVector(token: string): Float32Array {
    const cached = this.cache.get(token);
    if (cached) return cached;
    const out = new Float32Array(this.width);
    let filled = 0;
    for (let block = 0; filled < this.width; block++) {
      const digest = createHash('sha256')
        .update(`${this.seed}/tok/${token}/${block}`)
        .digest();
      for (let o = 0; o + 4 <= digest.length && filled < this.width; o += 4) {
        out[filled++] = (digest.readUInt32LE(o) / 0xffffffff) * 2 - 1;
      }
    }
    this.cache.set(token, out);
    return out;
  }

  async encode(sentence: string, aspect: string): Promise<EncodedSequence> {
    const { tokens, truncated } = assembleTokens(sentence, aspect, this.maxLen);
    const values = new Float32Array(tokens.length * this.width);
    tokens.forEach((token, row) => {
      values.set(this.tokenVector(token), row * this.width);
    });
    return { values, seqLen: tokens.length, truncated };
  }
}

/**
 * Frozen pretrained encoder via @huggingface/transformers, loaded strictly
 * from a local snapshot directory (this tool never downloads weights).
 * Emits the last hidden layer per assembled token; sentence and aspect get
 * distinct segment ids through the tokenizer's text-pair path.
 */
export class TransformersEncoder implements Encoder {
  readonly width = 768;
  readonly name: string;
  private readonly modelPath: string;
  private readonly maxLen: number;
  private pipeline: { tokenizer: any; model: any } | null = null;

  constructor(modelPath: string, maxLen = 512) {
    this.modelPath = modelPath;
    this.maxLen = maxLen;
    this.name = `transformers:${modelPath}`;
  }

  private async load() {
    if (this.pipeline) return this.pipeline;
    let lib: any;
    try {
      lib = await import('@huggingface/transformers');
    } catch {
      throw new EncoderError(
        'the transformers encoder needs the optional dependency ' +
        '@huggingface/transformers (npm install @huggingface/transformers)');
    }
    try {
      const tokenizer = await lib.AutoTokenizer.from_pretrained(this.modelPath, {
        local_files_only: true,
      });
      const model = await lib.AutoModel.from_pretrained(this.modelPath, {
        local_files_only: true,
      });
      this.pipeline = { tokenizer, model };
    } catch (err) {
      throw new EncoderError(
        `could not load a local encoder snapshot from ${this.modelPath}: ${err}`);
    }
    return this.pipeline;
  }

  async encode(sentence: string, aspect: string): Promise<EncodedSequence> {
    const { tokenizer, model } = await this.load();
    const encoded = await tokenizer(sentence, {
      text_pair: aspect,
      truncation: true,
      max_length: this.maxLen,
    });
    const output = await model(encoded);
    const hidden = output.last_hidden_state;
    const [, seqLen, width] = hidden.dims;
    if (width !== this.width) {
      throw new EncoderError(
        `encoder width ${width} != expected ${this.width}`);
    }
    return {
      values: Float32Array.from(hidden.data as Iterable<number>),
      seqLen,
      truncated: false,
    };
  }
}

/** "hash", "hash:<width>", or a local model directory for transformers. */
export function makeEncoder(spec: string, seed = 0, maxLen = 128): Encoder {
  if (spec === 'hash') return new HashEncoder(768, seed, maxLen);
  const hashMatch = /^hash:(\d+)$/.exec(spec);
  if (hashMatch) return new HashEncoder(Number(hashMatch[1]), seed, maxLen);
  return new TransformersEncoder(spec, Math.max(maxLen, 512));
}
