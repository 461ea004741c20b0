"""What the parser does with the usual ways a model mangles its answer.

Run: python demos/03_repair_ladder.py
"""

from cmrbench.classifier import ParseFailure, parse_prediction
from cmrbench.core import default_label_set

labels = default_label_set()
responses = [
    '{"diagnosis": "HCM"}',
    '<think>septal thickening, SAM...</think>{"diagnosis": "HCM"}',
    'Sure! Here you go:\n```json\n{"diagnosis": "cardiac amyloidosis"}\n```',
    '{"Diagnosis": "myocarditis"}',
    "I think this is most likely DCM.",
    '{"diagnosis": "pericarditis"}',
]

for text in responses:
    try:
        r = parse_prediction(text, labels)
        print(f"{r.parse_status:9} {r.label:7} via {' > '.join(r.trace.steps)}")
    except ParseFailure as exc:
        print(f"failed    -       via {' > '.join(exc.trace.steps)}  raw={exc.raw_response[:40]!r}")
