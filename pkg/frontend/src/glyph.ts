// Placeholder hand glyph: five finger bars, active ones highlighted.

export const FINGERS = ['thumb', 'index', 'middle', 'ring', 'little'] as const;

export const MODE_FINGERS: Record<number, string[]> = {
  1: [],
  2: ['thumb'],
  3: ['index'],
  4: ['middle'],
  5: ['ring'],
  6: ['little'],
  7: ['thumb', 'index'],
  8: ['index', 'middle'],
  9: ['middle', 'ring'],
  10: ['ring', 'little'],
  11: ['thumb', 'middle'],
  12: ['index', 'ring'],
};

const HEIGHTS = [46, 78, 88, 80, 60];

export function handGlyphSvg(modeId: number): string {
  const active = new Set(MODE_FINGERS[modeId] ?? []);
  const bars = FINGERS.map((finger, i) => {
    const h = HEIGHTS[i];
    const x = 14 + i * 22;
    const on = active.has(finger);
    const fill = on ? '#e05555' : '#5577dd';
    return `<rect x="${x}" y="${100 - h}" width="14" height="${h}" rx="6" fill="${fill}" opacity="${on ? 1 : 0.45}"/>`;
  }).join('');
  const palm = `<rect x="10" y="96" width="112" height="40" rx="12" fill="#8899bb" opacity="0.5"/>`;
  return `<svg viewBox="0 0 132 140" xmlns="http://www.w3.org/2000/svg">${bars}${palm}</svg>`;
}
