/** Pipeline: raw examples -> assembled sequences -> encoder -> interchange. */

import { Encoder } from './encoder.js';
import { InterchangeRecord, writeInterchange } from './interchange.js';
import { RawExample } from './types.js';

export interface ExportOptions {
  name: string;
  outDir: string;
  /** called with the example id when its sentence had to be truncated */
  onTruncate?: (id: string) => void;
}

export interface ExportResult {
  manifestPath: string;
  tensorPath: string;
  count: number;
  truncatedIds: string[];
}

export async function exportExamples(
  examples: RawExample[],
  encoder: Encoder,
  options: ExportOptions,
): Promise<ExportResult> {
  const records: InterchangeRecord[] = [];
  const truncatedIds: string[] = [];
  const perSplit: Record<string, number> = {};

  for (const example of examples) {
    const index = (perSplit[example.split] = (perSplit[example.split] ?? 0) + 1);
    const id = `${example.split}-${String(index - 1).padStart(5, '0')}`;
    const encoded = await encoder.encode(example.sentence, example.aspect);
    if (encoded.truncated) {
      truncatedIds.push(id);
      options.onTruncate?.(id);
    }
    records.push({
      id,
      sentence_key: example.sentence,
      aspect: example.aspect,
      label: example.polarity,
      split: example.split,
      values: encoded.values,
      seqLen: encoded.seqLen,
    });
  }

  const paths = writeInterchange(records, options.name, encoder.width,
    options.outDir);
  return { ...paths, count: records.length, truncatedIds };
}
