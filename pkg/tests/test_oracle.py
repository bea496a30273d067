import json
import sys

import numpy as np
import pytest

from gapattack.errors import (
    BudgetExhaustedError,
    MalformedFileError,
    OracleError,
    ShapeMismatchError,
)
from gapattack.image import Image
from gapattack.netlib import dense, flatten, forward, random_model, softmax, tiny_capsnet_layers
from gapattack.oracle import (
    InProcessOracle,
    RecordingOracle,
    ReplayOracle,
    SubprocessOracle,
    image_key,
    with_budget,
)


def small_model(seed=0):
    return random_model((flatten(), dense(3), softmax()), (2, 2, 1), seed=seed)


def random_image(seed=0, shape=(2, 2, 1)):
    return Image(np.random.default_rng(seed).random(shape))


# --- in-process --------------------------------------------------------------


def test_in_process_matches_forward():
    model = small_model()
    oracle = InProcessOracle(model)
    img = random_image(1)
    probs = oracle.classify(img)
    assert np.array_equal(probs.scores, forward(model, img).scores)
    assert oracle.query_count == 1


def test_in_process_repeated_calls_bit_identical():
    oracle = InProcessOracle(random_model(tiny_capsnet_layers(4), (8, 8, 1), seed=3))
    img = Image(np.random.default_rng(4).random((8, 8, 1)))
    first = oracle.classify(img).scores
    for _ in range(9):
        assert np.array_equal(oracle.classify(img).scores, first)
    assert oracle.query_count == 10


def test_classify_does_not_mutate_input():
    oracle = InProcessOracle(small_model())
    img = random_image(5)
    before = img.data.copy()
    oracle.classify(img)
    assert np.array_equal(img.data, before)


def test_shape_mismatch_rejected_and_not_counted():
    oracle = InProcessOracle(small_model())
    with pytest.raises(ShapeMismatchError):
        oracle.classify(random_image(0, shape=(3, 2, 1)))
    assert oracle.query_count == 0


def test_minimum_two_classes():
    with pytest.raises(ValueError):
        ReplayOracle(1, (2, 2, 1), {})


# --- recording / replay -------------------------------------------------------


def test_record_then_replay_verbatim(tmp_path):
    inner = InProcessOracle(small_model(seed=7))
    recorder = RecordingOracle(inner)
    images = [random_image(s) for s in range(5)]
    recorded = [recorder.classify(img).scores for img in images]
    path = str(tmp_path / "table.json")
    recorder.save_table(path)

    replay = ReplayOracle.from_file(path)
    assert replay.class_count == 3
    assert replay.input_shape == (2, 2, 1)
    for img, want in zip(images, recorded):
        assert np.array_equal(replay.classify(img).scores, want)


def test_replay_rejects_unknown_image(tmp_path):
    recorder = RecordingOracle(InProcessOracle(small_model()))
    recorder.classify(random_image(0))
    path = str(tmp_path / "table.json")
    recorder.save_table(path)
    replay = ReplayOracle.from_file(path)
    with pytest.raises(OracleError):
        replay.classify(random_image(99))


def test_replay_bad_table_file(tmp_path):
    path = tmp_path / "table.json"
    path.write_text("this is not json")
    with pytest.raises(MalformedFileError):
        ReplayOracle.from_file(str(path))
    path.write_text(json.dumps({"classes": 3}))
    with pytest.raises(MalformedFileError):
        ReplayOracle.from_file(str(path))


def test_replay_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        ReplayOracle.from_file(str(tmp_path / "absent.json"))


def test_image_key_is_content_hash():
    a = Image(np.full((2, 2, 1), 0.25))
    b = Image(np.full((2, 2, 1), 0.25))
    c = Image(np.full((2, 2, 1), 0.26))
    assert image_key(a) == image_key(b)
    assert image_key(a) != image_key(c)


def test_concurrency_flags():
    inner = InProcessOracle(small_model())
    assert inner.concurrency_safe
    assert not RecordingOracle(inner).concurrency_safe
    assert ReplayOracle(3, (2, 2, 1), {}).concurrency_safe
    assert with_budget(inner, 10).concurrency_safe


# --- budget --------------------------------------------------------------------


def test_budget_allows_then_raises():
    inner = InProcessOracle(small_model(seed=2))
    budgeted = with_budget(inner, 5)
    img = random_image(3)
    plain = inner.classify(img).scores  # direct call, not through the wrapper
    for _ in range(5):
        assert np.array_equal(budgeted.classify(img).scores, plain)
    with pytest.raises(BudgetExhaustedError):
        budgeted.classify(img)
    assert budgeted.query_count == 5
    # the rejected call never reached the inner oracle
    assert inner.query_count == 6  # 1 direct + 5 via wrapper


def test_budget_shape_mismatch_does_not_consume():
    budgeted = with_budget(InProcessOracle(small_model()), 2)
    with pytest.raises(ShapeMismatchError):
        budgeted.classify(random_image(0, shape=(4, 4, 1)))
    assert budgeted.query_count == 0
    budgeted.classify(random_image(1))
    budgeted.classify(random_image(2))
    with pytest.raises(BudgetExhaustedError):
        budgeted.classify(random_image(3))


def test_budget_rejects_nonpositive():
    with pytest.raises(ValueError):
        with_budget(InProcessOracle(small_model()), 0)


# --- subprocess ------------------------------------------------------------------


FIXED_STUB = (
    "import json, sys\n"
    "print(json.dumps({'classes': 3, 'shape': [2, 2, 1]}), flush=True)\n"
    "for line in sys.stdin:\n"
    "    req = json.loads(line)\n"
    "    print(json.dumps({'id': req['id'], 'probs': [0.2, 0.5, 0.3]}), flush=True)\n"
)

# answers with the pixel at flat index 2 — that is (row 1, col 0, channel 0)
# in row-major channel-minor order for a 2x2x1 image — plus its complement
PIXEL_ECHO_STUB = (
    "import json, sys\n"
    "print(json.dumps({'classes': 2, 'shape': [2, 2, 1]}), flush=True)\n"
    "for line in sys.stdin:\n"
    "    req = json.loads(line)\n"
    "    p = req['pixels'][2]\n"
    "    print(json.dumps({'id': req['id'], 'probs': [p, 1.0 - p]}), flush=True)\n"
)

ERROR_STUB = (
    "import json, sys\n"
    "print(json.dumps({'classes': 2, 'shape': [2, 2, 1]}), flush=True)\n"
    "for line in sys.stdin:\n"
    "    req = json.loads(line)\n"
    "    print(json.dumps({'id': req['id'], 'error': 'backend exploded'}), flush=True)\n"
)

WRONG_ID_STUB = (
    "import json, sys\n"
    "print(json.dumps({'classes': 2, 'shape': [2, 2, 1]}), flush=True)\n"
    "for line in sys.stdin:\n"
    "    req = json.loads(line)\n"
    "    print(json.dumps({'id': req['id'] + 1, 'probs': [0.5, 0.5]}), flush=True)\n"
)


def stub_command(body):
    return [sys.executable, "-c", body]


def test_subprocess_handshake_and_classify():
    with SubprocessOracle(stub_command(FIXED_STUB)) as oracle:
        assert oracle.class_count == 3
        assert oracle.input_shape == (2, 2, 1)
        probs = oracle.classify(random_image(0))
        assert np.array_equal(probs.scores, [0.2, 0.5, 0.3])
        assert oracle.query_count == 1
        oracle.classify(random_image(1))
        assert oracle.query_count == 2


def test_subprocess_pixel_order_and_float_round_trip():
    # awkward values must survive the text protocol bit-exactly
    awkward = 1.0 / 3.0
    arr = np.array([[[0.1], [0.2]], [[awkward], [0.4]]])
    with SubprocessOracle(stub_command(PIXEL_ECHO_STUB)) as oracle:
        probs = oracle.classify(Image(arr))
        assert float(probs.scores[0]) == awkward
        assert float(probs.scores[1]) == 1.0 - awkward


def test_subprocess_error_reply():
    with SubprocessOracle(stub_command(ERROR_STUB)) as oracle:
        with pytest.raises(OracleError, match="backend exploded"):
            oracle.classify(random_image(0))


def test_subprocess_reply_id_mismatch():
    with SubprocessOracle(stub_command(WRONG_ID_STUB)) as oracle:
        with pytest.raises(OracleError, match="id"):
            oracle.classify(random_image(0))


def test_subprocess_bad_handshake():
    bad = "print('hello there', flush=True)\nimport sys; sys.stdin.read()\n"
    with pytest.raises(OracleError):
        SubprocessOracle(stub_command(bad))


def test_subprocess_immediate_exit():
    with pytest.raises(OracleError):
        SubprocessOracle(stub_command("pass"))


def test_subprocess_close_terminates_child():
    oracle = SubprocessOracle(stub_command(FIXED_STUB))
    oracle.classify(random_image(0))
    oracle.close()
    assert oracle._proc.poll() is not None
