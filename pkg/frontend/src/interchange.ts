/**
 * Writer for the binary interchange format the classifier consumes.
 *
 * tensors.bin: magic "STGE", uint32 LE version (=1), then per example a
 * uint32 seq_len, uint32 hidden_dim header followed by seq_len * hidden_dim
 * float32 LE values, row-major.  manifest.json carries byte offsets that
 * point at each record's seq_len field.
 */

import { closeSync, mkdirSync, openSync, writeFileSync, writeSync } from 'node:fs';
import { join } from 'node:path';

import { Counts, emptyCounts, Polarity, Split } from './types.js';

export const TENSOR_MAGIC = 'STGE';
export const TENSOR_VERSION = 1;

export interface InterchangeRecord {
  id: string;
  sentence_key: string;
  aspect: string;
  label: Polarity;
  split: Split;
  values: Float32Array; // row-major (seqLen x hiddenDim)
  seqLen: number;
}

export interface ManifestEntry {
  id: string;
  sentence_key: string;
  aspect: string;
  label: Polarity;
  split: Split;
  byte_offset: number;
  seq_len: number;
}

export function writeInterchange(
  records: InterchangeRecord[],
  name: string,
  hiddenDim: number,
  outDir: string,
): { manifestPath: string; tensorPath: string } {
  mkdirSync(outDir, { recursive: true });
  const manifestPath = join(outDir, 'manifest.json');
  const tensorPath = join(outDir, 'tensors.bin');

  const counts: Counts = emptyCounts();
  const entries: ManifestEntry[] = [];

  const fd = openSync(tensorPath, 'w');
  try {
    const header = Buffer.alloc(8);
    header.write(TENSOR_MAGIC, 0, 'ascii');
    header.writeUInt32LE(TENSOR_VERSION, 4);
    let offset = writeSync(fd, header);

    for (const record of records) {
      if (record.values.length !== record.seqLen * hiddenDim) {
        throw new Error(
          `${record.id}: ${record.values.length} values != ` +
          `${record.seqLen} x ${hiddenDim}`);
      }
      const recordHeader = Buffer.alloc(8);
      recordHeader.writeUInt32LE(record.seqLen, 0);
      recordHeader.writeUInt32LE(hiddenDim, 4);
      const payload = Buffer.alloc(record.values.length * 4);
      record.values.forEach((v, i) => payload.writeFloatLE(v, i * 4));

      entries.push({
        id: record.id,
        sentence_key: record.sentence_key,
        aspect: record.aspect,
        label: record.label,
        split: record.split,
        byte_offset: offset,
        seq_len: record.seqLen,
      });
      counts[record.split][record.label] += 1;
      offset += writeSync(fd, recordHeader);
      offset += writeSync(fd, payload);
    }
  } finally {
    closeSync(fd);
  }

  const manifest = {
    name,
    hidden_dim: hiddenDim,
    counts,
    examples: entries,
  };
  writeFileSync(manifestPath, JSON.stringify(manifest, null, 1) + '\n');
  return { manifestPath, tensorPath };
}
