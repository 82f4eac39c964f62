// Optional runtime dependency: installed only when exporting with a real
// pretrained encoder.  Loaded via dynamic import in encoder.ts.
declare module '@huggingface/transformers';
