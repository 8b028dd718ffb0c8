/** Prompt templates combining a varying object with a concept placeholder. */

export const TEMPLATES = [
  "a painting of {obj} in the style of {c}",
  "a {obj} inspired by the style of {c}",
  "an artwork of {obj} by {c}",
  "{obj} painted in {c} style",
  "a picture of {obj} in {c} style",
  "the {obj} at dawn in the style of {c}",
];

export const OBJECTS = [
  "house", "river", "bridge", "cat", "mountain", "harbor", "garden", "street",
  "forest", "dancer", "train", "lighthouse", "market", "windmill", "meadow",
  "boat", "castle", "orchard", "canal", "tower", "field", "village", "cliff",
  "library", "fountain", "valley", "farm", "church", "island", "desert",
];

/** n distinct prompts that all mention the concept word. */
export function stylePrompts(concept: string, n: number): string[] {
  const prompts: string[] = [];
  for (let i = 0; i < n; i++) {
    const template = TEMPLATES[i % TEMPLATES.length];
    const object = OBJECTS[i % OBJECTS.length];
    prompts.push(template.replace("{obj}", object).replace("{c}", concept));
  }
  return prompts;
}
