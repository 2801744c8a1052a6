// Condition chips shown after the user selects an element. Each chip is a
// suggestion string from the service paired with the state it asserts; the
// service already puts the currently observed state first and we keep that
// order.

import type { SemanticObjectDoc } from "./types.js";

export interface ConditionChip {
  label: string;
  objectRef: string;
  stateName: string;
}

export function buildChips(
  object: SemanticObjectDoc,
  suggestedConditions: string[],
): ConditionChip[] {
  const chips: ConditionChip[] = [];
  for (const text of suggestedConditions) {
    // Longest suffix wins so "no records" is never shadowed by "records".
    const stateName = object.stateNames
      .filter((name) => text.endsWith(name))
      .sort((a, b) => b.length - a.length)[0];
    if (stateName === undefined) continue;
    chips.push({ label: text, objectRef: object.objectId, stateName });
  }
  return chips;
}
