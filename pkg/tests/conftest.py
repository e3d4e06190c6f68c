import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for the smf helper module

from notegrid import Annotation, NoteEvent


def hundred_note_annotation() -> Annotation:
    """Fixed 100-note synthetic annotation over 30 s with 12 labels.

    Built from the stdlib Mersenne generator, whose random() stream is
    stable across Python versions, so the golden numbers frozen against
    this fixture stay valid.
    """
    r = random.Random(0xC0FFEE)
    events = []
    for _ in range(100):
        onset = r.random() * 28.0
        duration = 0.05 + r.random() * 0.8
        label = int(r.random() * 12)
        events.append(NoteEvent(onset_sec=onset, offset_sec=onset + duration, label=label))
    return Annotation.from_events(events, num_labels=12, duration_sec=30.0)


@pytest.fixture(scope="session")
def hundred_notes() -> Annotation:
    return hundred_note_annotation()
