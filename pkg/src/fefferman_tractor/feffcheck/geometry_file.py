import hashlib
import json

from ..exprkit import ExprException, ExprPool, parse, to_source
from ..geocalc import GeometryException, GeometrySpec

SECTIONS = {
    "name": None,
    "geometry": {"dimension", "signature", "coords", "metric", "kappa", "scale"},
    "domain": None,
    "test": {"samples", "seed", "omega", "expected_verdict", "expected_lambda_sign"},
    "holonomy": {"epsilon", "steps", "loops_per_plane"},
}
REQUIRED_SECTIONS = ("geometry", "domain")
VERDICTS = ("FEFFERMAN_LOCAL", "ODD_DIM_NILPOTENT", "HYPOTHESES_FAIL", "INCONCLUSIVE_SIGN")
LAMBDA_SIGNS = ("negative", "zero", "positive")

# The metric is written as its lower triangle, row by row: g00, g10, g11, g20, ...


class GeometryFile:
    """JSON geometry document: chart, metric, vector field, sampling and test annotations."""

    def __init__(self, json_input: dict, path: str = None, text: str = None):
        self.path = path
        self.text = text if text is not None else json.dumps(json_input, indent=2)
        self.pool = ExprPool()
        self.validate_keys(json_input)
        self.spec = self.build_geometry_spec(json_input)
        self.test_parameters = dict(json_input.get("test", {}))
        self.holonomy_parameters = dict(json_input.get("holonomy", {}))
        self.validate_annotations()

    @classmethod
    def from_file(cls, path: str):
        with open(path, "rb") as json_file:
            raw = json_file.read()
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as error:
            line = raw.count(b"\n", 0, error.start) + 1
            column = error.start - (raw.rfind(b"\n", 0, error.start) + 1) + 1
            raise InvalidGeometryFileException(
                f"File is not valid UTF-8: byte 0x{raw[error.start]:02x}", path, None, line, column
            ) from error
        try:
            document = json.loads(text)
        except json.JSONDecodeError as error:
            raise InvalidGeometryFileException(f"Malformed JSON: {error.msg}", path, None, error.lineno, error.colno)
        if not isinstance(document, dict):
            raise InvalidGeometryFileException("Top level must be an object", path, None, 1, 1)
        geometry_file = cls(document, path=path, text=text)
        geometry_file.raw = raw
        return geometry_file

    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def input_hash(self) -> str:
        raw = getattr(self, "raw", None)
        if raw is None:
            raw = self.text.encode("utf-8")
        return hashlib.sha256(raw).hexdigest()

    @property
    def expected_verdict(self):
        return self.test_parameters.get("expected_verdict")

    @property
    def expected_lambda_sign(self):
        return self.test_parameters.get("expected_lambda_sign")

    def get_json_dict(self) -> dict:
        spec = self.spec
        n = spec.dimension
        document = {
            "name": spec.name,
            "geometry": {
                "dimension": n,
                "signature": list(spec.signature),
                "coords": list(spec.coords),
                "metric": [to_source(spec.g_lower[i][j]) for i in range(n) for j in range(i + 1)],
                "kappa": [to_source(e) for e in spec.kappa_upper],
                "scale": spec.scale_note,
            },
            "domain": {coord: [lo, hi] for coord, (lo, hi) in zip(spec.coords, spec.domain)},
        }
        test = dict(self.test_parameters)
        if spec.omega is not None:
            test["omega"] = to_source(spec.omega)
        test["samples"] = spec.samples
        test["seed"] = spec.seed
        document["test"] = test
        if self.holonomy_parameters:
            document["holonomy"] = dict(self.holonomy_parameters)
        return document

    def get_json_string(self) -> str:
        return json.dumps(self.get_json_dict(), indent=2)

    def save_to_file(self, save_to_file: str = ""):
        with open(save_to_file, "w") as json_file:
            json_file.write(self.get_json_string())

    def validate_keys(self, json_input: dict):
        for key, value in json_input.items():
            if key not in SECTIONS:
                raise self.error(f"Unknown section {key!r}", key)
            allowed = SECTIONS[key]
            if allowed is not None:
                if not isinstance(value, dict):
                    raise self.error(f"Section {key!r} must be an object", key)
                for inner in value:
                    if inner not in allowed:
                        raise self.error(f"Unknown key {inner!r} in section {key!r}", f"{key}.{inner}", inner)
        for key in REQUIRED_SECTIONS:
            if key not in json_input:
                raise self.error(f"Missing section {key!r}", key)

    def build_geometry_spec(self, json_input: dict) -> GeometrySpec:
        geometry = json_input["geometry"]
        for key in ("dimension", "signature", "coords", "metric", "kappa"):
            if key not in geometry:
                raise self.error(f"Missing key {key!r} in section 'geometry'", f"geometry.{key}")
        n = geometry["dimension"]
        if not isinstance(n, int) or isinstance(n, bool):
            raise self.error("Dimension must be an integer", "geometry.dimension", "dimension")
        coords = list(geometry["coords"])
        metric_strings = geometry["metric"]
        if len(metric_strings) != n * (n + 1) // 2:
            raise self.error(
                f"Metric needs {n * (n + 1) // 2} lower-triangle entries, got {len(metric_strings)}", "geometry.metric", "metric"
            )
        entries = iter(metric_strings)
        rows = [[None] * n for _ in range(n)]
        for i in range(n):
            for j in range(i + 1):
                rows[i][j] = rows[j][i] = self.parse_expression(next(entries), coords, f"geometry.metric[{i},{j}]")
        kappa = tuple(
            self.parse_expression(source, coords, f"geometry.kappa[{index}]") for index, source in enumerate(geometry["kappa"])
        )
        domain = self.parse_domain(json_input["domain"], coords)
        test = json_input.get("test", {})
        omega = test.get("omega")
        if omega is not None:
            omega = self.parse_expression(omega, coords, "test.omega")
        try:
            return GeometrySpec(
                dimension=n,
                signature=tuple(geometry["signature"]),
                coords=tuple(coords),
                g_lower=tuple(tuple(row) for row in rows),
                kappa_upper=kappa,
                domain=domain,
                samples=test.get("samples", 20),
                seed=test.get("seed", 0),
                scale_note=geometry.get("scale", "unknown"),
                omega=omega,
                name=json_input.get("name", "geometry"),
                pool=self.pool,
            )
        except GeometryException as error:
            raise InvalidGeometryFileException(str(error), self.path, "geometry", *self.locate("geometry")) from error

    def parse_expression(self, source, coords, key):
        if not isinstance(source, str):
            raise self.error(f"Expression at {key} must be a string, got {source!r}", key)
        try:
            return parse(source, coords, self.pool)
        except ExprException as error:
            line, column = self.locate(json.dumps(source))
            inner_line, inner_column = getattr(error, "line", None), getattr(error, "column", None)
            if column is not None and inner_line is not None and inner_column is not None:
                column += self.string_offset(source, inner_line, inner_column)
            raise InvalidGeometryFileException(str(error), self.path, key, line, column) from error

    @staticmethod
    def string_offset(source: str, line: int, column: int) -> int:
        """Distance from the opening quote of the JSON string to the character at line, column of source."""
        lines = source.split("\n")
        index = sum(len(text) + 1 for text in lines[: line - 1]) + column - 1
        # escapes in the encoded string shift the column
        return len(json.dumps(source[:index])) - 1

    def parse_domain(self, section, coords) -> tuple:
        if not isinstance(section, dict):
            raise self.error("Section 'domain' must be an object", "domain")
        for coord in section:
            if coord not in coords:
                raise self.error(f"Domain names undeclared coordinate {coord!r}", f"domain.{coord}", coord)
        intervals = []
        for coord in coords:
            if coord not in section:
                raise self.error(f"Domain misses coordinate {coord!r}", "domain")
            interval = section[coord]
            if isinstance(interval, str):
                interval = interval.split()
            try:
                lo, hi = (float(value) for value in interval)
            except (TypeError, ValueError):
                raise self.error(f"Domain of {coord!r} must be a pair lo, hi", f"domain.{coord}", coord)
            intervals.append((lo, hi))
        return tuple(intervals)

    def validate_annotations(self):
        verdict = self.expected_verdict
        if verdict is not None and verdict not in VERDICTS:
            raise self.error(f"Unknown expected verdict {verdict!r}", "test.expected_verdict", "expected_verdict")
        sign = self.expected_lambda_sign
        if sign is not None and sign not in LAMBDA_SIGNS:
            raise self.error(f"Unknown expected lambda sign {sign!r}", "test.expected_lambda_sign", "expected_lambda_sign")

    def locate(self, needle: str) -> tuple:
        """1-based line and column of the first occurrence of needle in the source text."""
        position = self.text.find(needle)
        if position < 0:
            return None, None
        line = self.text.count("\n", 0, position) + 1
        column = position - (self.text.rfind("\n", 0, position) + 1) + 1
        return line, column

    def error(self, message, key, needle=None):
        line, column = self.locate(json.dumps(needle if needle is not None else key.split(".")[-1]))
        return InvalidGeometryFileException(message, self.path, key, line, column)


class RescaledGeometryFile(GeometryFile):
    """The same document with its metric multiplied by e^{2ω}."""

    def __init__(self, json_input: dict, path: str = None, text: str = None, omega: str = None):
        super().__init__(json_input, path, text)
        if omega is not None:
            factor = self.parse_expression(omega, self.spec.coords, "omega")
            self.spec = self.spec.rescaled(factor)
        else:
            self.spec = self.spec.rescaled()

    @classmethod
    def from_geometry_file(cls, geometry_file: GeometryFile, omega: str = None):
        document = json.loads(geometry_file.text)
        rescaled = cls(document, path=geometry_file.path, text=geometry_file.text, omega=omega)
        raw = getattr(geometry_file, "raw", None)
        if raw is not None:
            rescaled.raw = raw
        return rescaled


class InvalidGeometryFileException(Exception):
    def __init__(self, message, path=None, key=None, line=None, column=None):
        where = path or "<document>"
        if line is not None:
            where = f"{where}:{line}:{column}"
        if key is not None:
            where = f"{where} [{key}]"
        super().__init__(f"{where}: {message}")
        self.path = path
        self.key = key
        self.line = line
        self.column = column
