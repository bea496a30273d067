import numpy as np
import pytest

from gapattack.errors import MalformedFileError
from gapattack.image import Image, PixelCoord, ProbVector, clip, load_image, save_image


def test_image_promotes_2d_to_single_channel():
    img = Image(np.zeros((4, 5)))
    assert img.shape == (4, 5, 1)
    assert img.height == 4 and img.width == 5 and img.channels == 1


def test_image_rejects_out_of_range_and_bad_channels():
    with pytest.raises(ValueError):
        Image(np.full((2, 2, 1), 1.5))
    with pytest.raises(ValueError):
        Image(np.full((2, 2, 1), -0.25))
    with pytest.raises(ValueError):
        Image(np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        Image(np.array([[[np.nan]]]))


def test_image_data_is_read_only():
    img = Image(np.zeros((2, 2, 1)))
    with pytest.raises(ValueError):
        img.data[0, 0, 0] = 1.0


def test_with_pixel_returns_new_clamped_image():
    img = Image(np.zeros((2, 2, 1)))
    bumped = img.with_pixel(PixelCoord(1, 0, 0), 2.0)
    assert bumped.data[1, 0, 0] == 1.0
    assert img.data[1, 0, 0] == 0.0


def test_clip_clamps_and_is_idempotent():
    raw = np.array([[[1.07], [-0.1]], [[0.5], [0.0]]])
    clipped = clip(raw)
    assert clipped.data[0, 0, 0] == 1.0
    assert clipped.data[0, 1, 0] == 0.0
    assert clipped.data[1, 0, 0] == 0.5
    again = clip(clipped)
    assert np.array_equal(again.data, clipped.data)


def test_probvector_validation():
    with pytest.raises(ValueError):
        ProbVector(np.array([0.5]))  # too short
    with pytest.raises(ValueError):
        ProbVector(np.array([0.5, 1.2]))
    with pytest.raises(ValueError):
        ProbVector(np.array([0.5, 0.1]), class_labels=("only-one",))


def test_probvector_argmax_tie_breaks_to_lowest_index():
    probs = ProbVector(np.array([0.2, 0.9, 0.9, 0.1]))
    assert probs.argmax() == 1
    assert probs.argmax() == probs.argmax()  # stable


def test_probvector_rank_orders_ties_by_index():
    probs = ProbVector(np.array([0.3, 0.9, 0.9, 0.1]))
    assert probs.rank(1) == 1
    assert probs.rank(2) == 2
    assert probs.rank(3) == 0
    assert probs.rank(4) == 3
    with pytest.raises(ValueError):
        probs.rank(0)
    with pytest.raises(ValueError):
        probs.rank(5)


def test_quantization_rounds_half_up(tmp_path):
    # round-half-up: floor(0.5 * 255 + 0.5) = 128, by direct arithmetic
    img = Image(np.full((1, 2, 1), 0.5))
    path = str(tmp_path / "gray.png")
    save_image(img, path)
    reloaded = load_image(path)
    assert np.all(reloaded.data == 128 / 255)


def test_ppm_endpoint_mapping(tmp_path):
    path = str(tmp_path / "tiny.ppm")
    payload = bytes([0, 0, 0, 255, 255, 255, 0, 0, 0, 255, 255, 255])
    with open(path, "wb") as fh:
        fh.write(b"P6\n2 2\n255\n" + payload)
    img = load_image(path)
    assert img.shape == (2, 2, 3)
    assert np.array_equal(img.data[0, 0], [0.0, 0.0, 0.0])
    assert np.array_equal(img.data[0, 1], [1.0, 1.0, 1.0])


@pytest.mark.parametrize("fmt,channels", [("ppm", 3), ("ppm", 1), ("png", 3), ("png", 1)])
def test_round_trip_is_identity_on_8bit_payloads(tmp_path, fmt, channels):
    rng = np.random.default_rng(11)
    raw = rng.integers(0, 256, size=(5, 7, channels), dtype=np.uint8)
    img = Image(raw.astype(np.float64) / 255.0)
    path = str(tmp_path / f"img.{fmt}")
    save_image(img, path, format=fmt)
    once = load_image(path, format=fmt)
    assert np.array_equal(once.data, img.data)
    save_image(once, path, format=fmt)
    assert np.array_equal(load_image(path, format=fmt).data, img.data)


def test_ppm_save_load_byte_identical_payload(tmp_path):
    rng = np.random.default_rng(5)
    raw = rng.integers(0, 256, size=(4, 4, 3), dtype=np.uint8)
    src = str(tmp_path / "src.ppm")
    with open(src, "wb") as fh:
        fh.write(b"P6\n4 4\n255\n" + raw.tobytes())
    dst = str(tmp_path / "dst.ppm")
    save_image(load_image(src), dst)
    assert open(dst, "rb").read().split(b"255\n", 1)[1] == raw.tobytes()


def test_all_zero_image_writes_zero_payload(tmp_path):
    path = str(tmp_path / "black.ppm")
    save_image(Image(np.zeros((3, 3, 3))), path)
    payload = open(path, "rb").read().split(b"255\n", 1)[1]
    assert payload == bytes(27)


def test_ppm_comments_and_whitespace_in_header(tmp_path):
    path = str(tmp_path / "weird.ppm")
    with open(path, "wb") as fh:
        fh.write(b"P6 # comment\n# another\n 2\t1 \n255\n" + bytes(6))
    assert load_image(path).shape == (1, 2, 3)


@pytest.mark.parametrize(
    "blob",
    [
        b"P3\n1 1\n255\n0 0 0\n",  # ascii variant unsupported
        b"P6\n2 2\n65535\n" + bytes(24),  # 16-bit maxval
        b"P6\n2 2\n255\n" + bytes(5),  # truncated payload
        b"P6\n2\n255\n",  # header cut short
    ],
)
def test_malformed_pnm_rejected(tmp_path, blob):
    path = str(tmp_path / "bad.ppm")
    with open(path, "wb") as fh:
        fh.write(blob)
    with pytest.raises(MalformedFileError):
        load_image(path)


def test_missing_file_raises_file_not_found():
    with pytest.raises(FileNotFoundError):
        load_image("/nonexistent/nowhere.png")


def test_grayscale_ppm_request_writes_pgm(tmp_path):
    path = str(tmp_path / "gray.pgm")
    save_image(Image(np.full((2, 2, 1), 1.0)), path)
    blob = open(path, "rb").read()
    assert blob.startswith(b"P5\n")
    assert load_image(path).channels == 1


def test_unknown_extension_needs_explicit_format(tmp_path):
    img = Image(np.zeros((2, 2, 1)))
    with pytest.raises(ValueError):
        save_image(img, str(tmp_path / "img.bmp"))
    save_image(img, str(tmp_path / "img.bin"), format="png")
    assert load_image(str(tmp_path / "img.bin"), format="png").shape == (2, 2, 1)
