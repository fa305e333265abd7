/** Thin-lens arithmetic for the client-side focal-length readout. */

export function computeFocalLength(uCm: number, vCm: number): number {
  if (uCm <= 0 || vCm <= 0) {
    throw new Error(`distances must be positive, got u=${uCm} v=${vCm}`);
  }
  return 1 / (1 / uCm + 1 / vCm);
}

export function percentError(fMeasured: number, fNominal: number): number {
  if (fNominal <= 0) throw new Error(`nominal must be positive, got ${fNominal}`);
  return (100 * Math.abs(fMeasured - fNominal)) / fNominal;
}
