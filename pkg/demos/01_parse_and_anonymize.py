# Parsing a raw transcript and masking its main characters.
#
# A transcript arrives as plain text: scene headings in brackets, dialogue as
# "Name: line", stage directions in parentheses. We turn that into structured
# scenes, decide who the main characters are, and replace their names with
# anonymous speaker IDs while keeping everyone else readable.

from tvsg.anonymize import anonymize_corpus
from tvsg.parsing import (
    build_alias_table,
    default_rules,
    parse_episode,
    select_main_characters,
)

RAW = """\
[Scene: Central Perk, everyone is there]
Ross: I saw Rachel at the coffee place
Gunther: your usual?
Rachel Green: we were on a break
(the room goes quiet)
ROSS: no we were not
[Scene: the hallway]
Monica: did you two fight again
Rachel: ask him
"""

# Step 1: parse. The default rules recognize bracketed scene boundaries,
# "Name: text" dialogue, and treat the rest as background.
scenes = parse_episode(RAW, default_rules(), show="friends", episode_id="s01e01")
print(f"parsed {len(scenes)} scenes")
for scene in scenes:
    print(f"  scene {scene.scene_index}:")
    for line in scene.lines:
        label = line.speaker or line.kind
        print(f"    [{label}] {line.text}")

# Step 2: an alias table maps surface spellings to canonical names.
# "ROSS", "Ross" and "Ross Geller" are all the same person.
cast = [
    ("ross", ["Ross", "Ross Geller"]),
    ("rachel", ["Rachel", "Rachel Green"]),
    ("monica", ["Monica", "Mon"]),
]
table = build_alias_table(cast)
print("\n'Rachel Green' resolves to:", table.resolve("Rachel Green"))
print("'Gunther' resolves to:", table.resolve("Gunther"))

# Step 3: rank candidates by how much they talk and keep the top few.
roster = select_main_characters(scenes, table, max_n=6)
print("main character roster:", roster)

# Step 4: anonymize. Each scene independently shuffles which character gets
# which ID, so P0 in one scene tells you nothing about P0 in the next.
# Supporting speakers such as Gunther keep their names: guessing is only
# about the roster.
corpus = anonymize_corpus(scenes, table, roster, base_seed=0)
for inst in corpus:
    print(f"\nscene {inst.scene_index}  candidates={list(inst.candidates)}")
    for line in inst.lines:
        label = line.speaker_id or line.speaker or line.kind
        print(f"  [{label}] {line.text}")
    print("  gold:", inst.gold)

# Name mentions inside the dialogue text survive on purpose: "I saw Rachel"
# stays as spoken. The task hides who is speaking, not who is spoken about.
