"""
Helper Utilities - seeded RNG, angle specs, PGM / sinogram / CSV / JSON I/O
"""

import csv
import json
import struct
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from utils.errors import ConfigError

PathLike = Union[str, Path]

SINOGRAM_MAGIC = b"TGSINO01"


def make_rng(seed: Optional[int] = None) -> np.random.Generator:
    """numpy Generator on the PCG64 bit generator; the only RNG used anywhere"""
    return np.random.Generator(np.random.PCG64(seed))


def parse_angles(spec: str) -> List[float]:
    """
    Parse "start:step:stop" in degrees, stop inclusive

    "0:1.5:178.5" gives 120 angles. A single number is one angle.

    Raises:
        ConfigError: malformed spec or a non-positive step
    """
    parts = spec.split(":")
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"invalid angle spec '{spec}'; expected start:step:stop")

    if len(values) == 1:
        return values
    if len(values) != 3:
        raise ConfigError(f"invalid angle spec '{spec}'; expected start:step:stop")

    start, step, stop = values
    if step <= 0:
        raise ConfigError(f"angle step must be positive, got {step}")
    if stop < start:
        raise ConfigError(f"angle spec '{spec}' ends before it starts")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(count)]


def parse_float_list(spec: str) -> List[float]:
    """'1e-3,2e-3' -> [0.001, 0.002]"""
    try:
        return [float(s) for s in spec.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"invalid number list '{spec}'")


def _prepare(filepath: PathLike) -> Path:
    path = Path(filepath)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def save_to_json(filepath: PathLike, data: dict) -> Path:
    """Save data to a JSON file (UTF-8, stable key order)"""
    path = _prepare(filepath)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, ensure_ascii=False)
        f.write("\n")
    return path


def append_jsonl(filepath: PathLike, record: dict) -> Path:
    """Append one record as a single JSON line"""
    path = _prepare(filepath)
    with open(path, "a", encoding="utf-8") as f:
        f.write(json.dumps(record, ensure_ascii=False) + "\n")
    return path


def load_jsonl(filepath: PathLike) -> List[dict]:
    with open(filepath, "r", encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def write_csv(filepath: PathLike, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = _prepare(filepath)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    return path


def read_csv(filepath: PathLike) -> List[Dict[str, str]]:
    with open(filepath, "r", newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def to_gray(image: np.ndarray) -> np.ndarray:
    """Clamp to [0, 1] and scale to 0..255"""
    clamped = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    return np.rint(clamped * 255.0).astype(np.uint8)


def write_pgm(filepath: PathLike, image: np.ndarray, binary: bool = True) -> Path:
    """
    Write an image as PGM, P5 (binary) by default or P2 (plain text)

    Args:
        filepath: Output path
        image: 2-D array of values in [0, 1]; values outside are clamped
        binary: False writes P2
    """
    gray = to_gray(image)
    if gray.ndim != 2:
        raise ConfigError(f"PGM export needs a 2-D image, got shape {gray.shape}")
    rows, cols = gray.shape
    path = _prepare(filepath)

    if binary:
        with open(path, "wb") as f:
            f.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
            f.write(gray.tobytes())
    else:
        with open(path, "w", encoding="ascii") as f:
            f.write(f"P2\n{cols} {rows}\n255\n")
            for line in gray:
                f.write(" ".join(str(int(v)) for v in line) + "\n")
    return path


def read_pgm(filepath: PathLike) -> np.ndarray:
    """Read a P2 or P5 file (maxval 255) into a uint8 array"""
    data = Path(filepath).read_bytes()
    tokens: List[bytes] = []
    pos = 0
    # header: magic, width, height, maxval; '#' comments allowed
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while end < len(data) and not data[end:end + 1].isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end

    magic, cols, rows, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 255:
        raise ConfigError(f"unsupported PGM maxval {maxval}")
    if magic == b"P5":
        pixels = np.frombuffer(data[pos + 1:pos + 1 + rows * cols], dtype=np.uint8)
    elif magic == b"P2":
        pixels = np.array(data[pos:].split(), dtype=np.int64).astype(np.uint8)
    else:
        raise ConfigError(f"not a PGM file: magic {magic!r}")
    return pixels.reshape(rows, cols)


def write_sinogram(filepath: PathLike, b: np.ndarray) -> Path:
    """
    Write a sinogram; ``.csv`` gives one value per line, anything else the raw format

    Raw format: 8-byte magic, little-endian uint64 count, then the values as
    little-endian float64.
    """
    path = _prepare(filepath)
    b = np.asarray(b, dtype=np.float64)
    if path.suffix.lower() == ".csv":
        with open(path, "w", encoding="utf-8") as f:
            for v in b:
                f.write(repr(float(v)) + "\n")
    else:
        with open(path, "wb") as f:
            f.write(SINOGRAM_MAGIC)
            f.write(struct.pack("<Q", len(b)))
            f.write(b.astype("<f8").tobytes())
    return path


def read_sinogram(filepath: PathLike) -> np.ndarray:
    path = Path(filepath)
    if path.suffix.lower() == ".csv":
        return np.loadtxt(path, dtype=np.float64, ndmin=1)

    data = path.read_bytes()
    if data[:8] != SINOGRAM_MAGIC:
        raise ConfigError(f"{path} is not a raw sinogram file")
    (count,) = struct.unpack("<Q", data[8:16])
    return np.frombuffer(data[16:16 + 8 * count], dtype="<f8").astype(np.float64)
