"""Write the bundled offline fixture: 30 documents, 10 labelled questions, config, templates.

Ten topics, each with one gold document and two distractors that share its
vocabulary, so that lexical and hashed-dense retrieval do not always put the
gold document first.

    python scripts/make_fixture.py [OUT_DIR]
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

DOCS = [
    ("d01", "The Velmora lighthouse was completed in 1874 under engineer Tomas Reyd. Its first lamp burned colza oil and could be seen from 19 nautical miles. The tower stands 41 meters tall on the northern cape."),
    ("d02", "Tourists visiting the coastal beacon at Velmora can climb 212 steps. The beacon museum at Velmora exhibits ship models and coastal maps. Guided coastal walks begin at the beacon gate every morning."),
    ("d03", "Velmora harbour hosts a fish market each Saturday. Local boats unload herring and cod at the Velmora docks."),
    ("d04", "The Arlen fern grows only on shaded limestone cliffs. Its spores mature in late September. Botanists first described the Arlen fern in 1921."),
    ("d05", "Gardeners often confuse the Arlen fern with the common shield fern. Shield ferns prefer acidic soil and tolerate full sun."),
    ("d06", "Limestone quarries near Arlen closed in 1968. The cliffs are now a popular climbing area."),
    ("d07", "The Quorin protocol synchronizes clocks across sensor networks using a two-phase handshake. Each node exchanges timestamps with its parent and adjusts for measured delay. Quorin achieves microsecond accuracy on low-power radios."),
    ("d08", "Sensor networks on a farm measure soil moisture and temperature. Battery life is the main constraint for battery powered sensors with low-power radios."),
    ("d09", "The Quorin research group also published work on mesh routing and packet loss."),
    ("d10", "Toller glass was produced in the town of Brenmark between 1702 and 1790. Its distinctive color came from cobalt imported from Saxony. Workshops in Brenmark employed about forty glassblowers."),
    ("d11", "Blue pottery from Brenmark is glazed with local copper minerals. Collectors value the blue color of Brenmark pottery from the late period."),
    ("d12", "Saxony exported cobalt, silver and tin throughout the eighteenth century."),
    ("d13", "The Kessa marathon course record is 2 hours 9 minutes, set by Lina Oduya in 2019. The race starts at the river bridge and finishes in the old market square."),
    ("d14", "Kessa hosts a cycling race every spring. The cycling course climbs the river valley twice."),
    ("d15", "Marathon training plans usually last sixteen weeks and include long weekend runs."),
    ("d16", "The Drift compiler translates a subset of Python into WebAssembly. It performs escape analysis to place objects on the stack. Drift version 2 added support for generators."),
    ("d17", "WebAssembly modules run in browsers and on servers. Many languages now compile to WebAssembly."),
    ("d18", "Python generators yield values lazily and keep their local state between calls."),
    ("d19", "Ormund cheese is aged for fourteen months in limestone caves. It is made from raw sheep milk. The rind is washed with brine weekly."),
    ("d20", "Sheep farming in the Ormund valley declined after 1950. Many farms in the Ormund valley sold their flocks before the cheese cooperative was founded."),
    ("d21", "Cave aging gives cheeses a stable temperature and high humidity before they are sold."),
    ("d22", "Comet Pellan returns to the inner solar system every 71 years. It was last seen in 1986 and will return in 2057. Its tail contains unusual amounts of sodium."),
    ("d23", "Astronomers at the Pellan observatory catalogued over 300 variable stars."),
    ("d24", "Sodium emission is common in comet tails observed close to the sun."),
    ("d25", "The Hask bridge is a cable-stayed bridge opened in 2004. Its main span measures 620 meters. Engineers used wind tunnel tests to shape the deck."),
    ("d26", "The old Hask ferry carried cars across the strait for decades. My grandfather and many others rode the ferry across the strait until the bridge opened."),
    ("d27", "Wind tunnel tests are also used to design skyscrapers and race cars."),
    ("d28", "Mirel is a constructed language created in 1957 by the linguist Ada Venn. Its grammar has no irregular verbs. About two thousand people speak Mirel today."),
    ("d29", "Constructed languages such as Esperanto aim to be easy to learn."),
    ("d30", "Ada Venn also wrote three novels and a book on phonetics."),
]


def labels(fact, prem, phr, ling, user):
    return {
        "factuality": fact,
        "premise": prem,
        "phrasing": phr,
        "linguistic-variation": ling,
        "user-expertise": user,
    }


QUESTIONS = [
    ("q01", "When was the coastal beacon at Velmora constructed?",
     "The Velmora lighthouse was completed in 1874.", ["d01"],
     labels("factoid", "direct", "concise-natural", "distant", "novice")),
    ("q02", "On what kind of cliffs does the Arlen fern grow?",
     "The Arlen fern grows on shaded limestone cliffs.", ["d04"],
     labels("factoid", "direct", "concise-natural", "similar", "expert")),
    ("q03", "I am deploying battery powered sensors on a farm and need their clocks to agree, so how does the Quorin protocol keep them synchronized?",
     "Each node exchanges timestamps with its parent in a two-phase handshake and adjusts for measured delay.", ["d07"],
     labels("open-ended", "with-premise", "verbose-natural", "distant", "expert")),
    ("q04", "brenmark blue color source",
     "The color came from cobalt imported from Saxony.", ["d10"],
     labels("factoid", "direct", "short-search", "distant", "expert")),
    ("q05", "Who holds the Kessa marathon course record?",
     "Lina Oduya holds the Kessa marathon course record.", ["d13"],
     labels("factoid", "direct", "concise-natural", "similar", "expert")),
    ("q06", "drift compiler python webassembly escape analysis objects stack placement",
     "Drift uses escape analysis to place objects on the stack.", ["d16"],
     labels("open-ended", "direct", "long-search", "similar", "expert")),
    ("q07", "how long does the cheese from the ormund valley sit in caves before it is sold",
     "Ormund cheese is aged for fourteen months in limestone caves.", ["d19"],
     labels("open-ended", "direct", "long-search", "distant", "novice")),
    ("q08", "How often does Comet Pellan return to the inner solar system?",
     "Comet Pellan returns every 71 years.", ["d22"],
     labels("factoid", "direct", "concise-natural", "similar", "expert")),
    ("q09", "My grandfather rode the ferry across the strait years ago, and I wonder how long the main span of the Hask bridge is?",
     "The main span of the Hask bridge measures 620 meters.", ["d25"],
     labels("factoid", "with-premise", "verbose-natural", "distant", "novice")),
    ("q10", "mirel language creator",
     "Mirel was created by the linguist Ada Venn.", ["d28"],
     labels("open-ended", "direct", "short-search", "similar", "expert")),
]

CONFIG = """\
# Offline fixture pipeline: every binding is a deterministic mock.
corpus_path: corpus.jsonl
qa_path: qa.jsonl
output_dir: hybridrag-run
seed: 13
parallelism: 1

chunking:
  max_tokens: 512

sparse:
  k1: 1.2
  b: 0.75
  k: 30
  doc2query: true
  n_questions: 3
  question_generator: mock

dense:
  provider: hashing
  dimension: 256
  k: 30

fusion:
  k_each: 30
  top_n: 10
  w_sparse: 1.0
  w_dense: 1.0

rerank:
  scorer: oracle
  pool: union
  top_n: 10

generation:
  client: gold
  temperature: 0.6
  top_p: 0.9
  max_answer_tokens: 200
  context_size: 10

evaluation:
  strat_dims: [factuality, premise, phrasing, linguistic-variation, user-expertise]
  full_combination: true
  similarity_provider: hashing
  similarity_dimension: 384

presets:
  few-shot:
    retrieval: hybrid
    generation:
      prompt_strategy: few_shot
      template_path: few_shot_template.yaml
  cot:
    retrieval: hybrid
    generation:
      prompt_strategy: cot
      template_path: cot_template.yaml
"""

FEW_SHOT = {
    "strategy": "few_shot",
    "text": None,  # filled with the default body below
    "demonstrations": [
        {"question": "What metal gives cobalt glass its color?", "answer": "Cobalt gives the glass its blue color."},
        {"question": "When did the ferry stop running?", "answer": "The ferry stopped when the bridge opened."},
    ],
}

COT = {
    "strategy": "cot",
    "text": (
        "You are an AI assistant tasked with answering questions based on the provided information.\n\n"
        "Information: \n{context}\n\n"
        "Question: {query}\n\n"
        "First reason step by step about which passages are relevant, then give the final answer "
        "based only on the provided information, limited to 200 tokens. If the information doesn't "
        "contain the answer, say \"I don't have enough information to answer this question.\"\n\n"
        "Reasoning:"
    ),
}


def main(out: Path) -> None:
    import yaml

    sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))
    from hybridrag.generation import DEFAULT_TEMPLATE_TEXT

    out.mkdir(parents=True, exist_ok=True)
    with open(out / "corpus.jsonl", "w", encoding="utf-8") as fh:
        for doc_id, text in DOCS:
            fh.write(json.dumps({"doc_id": doc_id, "text": text}) + "\n")
    with open(out / "qa.jsonl", "w", encoding="utf-8") as fh:
        for qid, q, a, gold, lab in QUESTIONS:
            fh.write(json.dumps({"question_id": qid, "question": q, "gold_answer": a,
                                 "gold_doc_ids": gold, "labels": lab}) + "\n")
    (out / "config.yaml").write_text(CONFIG, encoding="utf-8")
    few = dict(FEW_SHOT, text=DEFAULT_TEMPLATE_TEXT)
    (out / "few_shot_template.yaml").write_text(yaml.safe_dump(few, sort_keys=False, width=1000), encoding="utf-8")
    (out / "cot_template.yaml").write_text(yaml.safe_dump(COT, sort_keys=False, width=1000), encoding="utf-8")
    print(f"wrote fixture to {out}")


if __name__ == "__main__":
    default = Path(__file__).resolve().parents[1] / "src" / "hybridrag" / "data" / "fixture"
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else default)
