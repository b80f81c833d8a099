"""Ground natural-language queries against a scene graph with the two-stage
deductive protocol.

A small furnished room is described as graph nodes; the offline rule-based
mock endpoint stands in for the LLM, so the whole loop runs deterministically
without any service. The transcript shows the two calls: caption-only
candidate selection, then grounding over the compact description with
relation sentences restricted to target-anchor pairs.
"""

import numpy as np

from scenegrounder.graph import SceneNode
from scenegrounder.llm import MockEndpoint
from scenegrounder.reasoner import ground

SCENE = [
    (0, "wooden table", (2.0, 0.0, 0.4), (1.2, 0.8, 0.8)),
    (1, "red chair", (1.0, 1.0, 0.45), (0.5, 0.5, 0.9)),
    (2, "blue chair", (3.0, -1.0, 0.45), (0.5, 0.5, 0.9)),
    (3, "floor lamp", (0.0, -2.5, 0.9), (0.3, 0.3, 1.8)),
    (4, "bookshelf", (-2.0, 2.0, 1.0), (0.8, 0.3, 2.0)),
]

QUERIES = [
    "the chair to the left of the wooden table",
    "the chair closest to the floor lamp",
    "the bookshelf",
]


def main():
    nodes = [SceneNode(id=i, caption=c, center=np.array(ctr), extent=np.array(ext))
             for i, c, ctr, ext in SCENE]
    endpoint = MockEndpoint()

    for query in QUERIES:
        print(f"\n=== {query!r}")
        answer = ground(nodes, query, endpoint)
        s1 = answer.stage_one
        print(f"stage one -> targets {s1.target_ids}, anchors {s1.anchor_ids}")
        for entry in answer.related:
            if entry.relations:
                for sentence in entry.relations:
                    print(f"  edge: {sentence}")
        chosen = next(n for n in nodes if n.id == answer.final_object_id)
        print(f"stage two -> object {answer.final_object_id} ({chosen.caption}) "
              f"in {len(answer.transcript)} LLM calls")


if __name__ == "__main__":
    main()
