"""Scripted model for the hexagon interior-angle walkthrough.

The first proposal request yields three solution paths. Each path's next
step closes with the 720 degree result. The grader favours the direct
polygon-formula route, so the search keeps expanding path 1.
"""

from __future__ import annotations

from .gateway import ScriptEntry, ScriptedModel

HEXAGON_QUESTION = "Calculate the sum of the interior angles of a hexagon."

PATH_FORMULA = "Use the polygon formula: the interior angles of an n-sided polygon sum to (n - 2) x 180 degrees, with n = 6."
PATH_TRIANGLES = "Draw diagonals from one vertex to split the hexagon into 4 triangles of 180 degrees each."
PATH_CENTER = "Join the center to all 6 vertices to form 6 triangles, then remove the 360 degrees around the center."

FINISH_FORMULA = "Substitute n = 6: (6 - 2) x 180 = 4 x 180 = 720 degrees. The answer is 720"
FINISH_TRIANGLES = "Add the triangles: 4 x 180 = 720 degrees. The answer is 720"
FINISH_CENTER = "Compute 6 x 180 - 360 = 1080 - 360 = 720 degrees. The answer is 720"


def hexagon_script() -> list[ScriptEntry]:
    # order matters: value prompts quote the finishing step, proposal
    # prompts quote the chosen path, and every prompt quotes the question
    return [
        ScriptEntry("(6 - 2) x 180 = 4 x 180 = 720", "0.95"),
        ScriptEntry("4 x 180 = 720 degrees. The answer", "0.8"),
        ScriptEntry("1080 - 360 = 720", "0.7"),
        ScriptEntry(PATH_FORMULA, f"1. {FINISH_FORMULA}"),
        ScriptEntry(PATH_TRIANGLES, f"1. {FINISH_TRIANGLES}"),
        ScriptEntry(PATH_CENTER, f"1. {FINISH_CENTER}"),
        ScriptEntry(
            "Let's think step by step",
            "A hexagon has 6 sides. The interior angles of an n-gon sum to (n - 2) x 180 degrees. "
            "(6 - 2) x 180 = 720. The answer is 720",
        ),
        ScriptEntry(
            HEXAGON_QUESTION,
            f"1. {PATH_FORMULA}\n2. {PATH_TRIANGLES}\n3. {PATH_CENTER}",
        ),
    ]


def hexagon_model() -> ScriptedModel:
    return ScriptedModel(hexagon_script(), name="scripted:hexagon")
