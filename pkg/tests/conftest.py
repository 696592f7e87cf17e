import numpy as np
import pytest

from chromatag import codec, detector, imgio, taggen


@pytest.fixture(scope="session")
def family():
    return codec.builtin_family()


@pytest.fixture(scope="session")
def table(family):
    return codec.build_signature_table(family)


@pytest.fixture(scope="session")
def det(table):
    return detector.ChromaTagDetector(table)


@pytest.fixture(scope="session")
def backgrounds():
    return imgio.builtin_backgrounds()


@pytest.fixture(scope="session")
def tagged_frame(family):
    """A 752x480 gray frame with tag 0 rendered dead center, plus its truth."""
    frame = np.full((480, 752, 3), 128, np.uint8)
    image, corners = taggen.render_tag(family, 0, 0, 16)
    frame[176:304, 312:440] = image
    return frame, corners + np.array([312.0, 176.0])
