from typing import Any

from django.core.exceptions import ValidationError as DjangoValidationError
from rest_framework import serializers

from tunneling.conf import FIELD_NAMES, Thresholds
from tunneling.core_model import parse_potential, potential_from_dict
from tunneling.validation import CASES

from .models import ExperimentRun

PIPELINES = ("scatter", "arrival", "times", "sequential", "oracle_compare")
ARRIVAL_METHODS = ("exact", "smeared", "monochromatic", "P1", "P2", "P3")
MAX_SWEEP_AXES = 3
DEFAULT_SECTIONS = ("physics", "grids", "method", "tolerances", "output", "units")

# config sections each pipeline cannot run without
REQUIRED_SECTIONS = {
    "scatter": ("potential", "grids.k"),
    "arrival": ("potential", "state", "physics.L", "grids.t"),
    "times": ("potential", "state"),
    "sequential": ("potential", "state", "physics.L", "grids.t", "method.sigma"),
    "oracle_compare": ("method.case",),
}


class StrictSerializer(serializers.Serializer):
    """Serializer that rejects keys it does not declare."""

    def to_internal_value(self, data: Any) -> Any:
        if isinstance(data, dict):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError(
                    {key: ["Unknown field."] for key in unknown}
                )
        return super().to_internal_value(data)


class RangeSerializer(StrictSerializer):
    start = serializers.FloatField()
    stop = serializers.FloatField()
    num = serializers.IntegerField(min_value=2)

    def to_internal_value(self, data: Any) -> Any:
        if isinstance(data, str):
            data = _parse_range(data)
        return super().to_internal_value(data)

    def validate(self, attrs: dict[str, Any]) -> dict[str, Any]:
        if attrs["stop"] <= attrs["start"]:
            raise serializers.ValidationError("Range stop must exceed start.")
        return attrs


def _parse_range(text: str) -> dict[str, Any]:
    """``start:stop:num`` as used on the command line."""
    parts = text.split(":")
    if len(parts) != 3:
        raise serializers.ValidationError(
            f"Range '{text}' must have the form start:stop:num."
        )
    return {"start": parts[0], "stop": parts[1], "num": parts[2]}


class PhysicsSerializer(StrictSerializer):
    M = serializers.FloatField(default=1.0, min_value=0.0)
    L = serializers.FloatField(required=False)

    def validate_M(self, value: float) -> float:
        if value <= 0:
            raise serializers.ValidationError("Mass must be positive.")
        return value


class PotentialField(serializers.Field):
    """Potential given as a mapping or as the short form ``square:V0=2,d=1``."""

    def to_internal_value(self, data: Any) -> dict[str, Any]:
        try:
            if isinstance(data, str):
                return parse_potential(data).describe()
            if isinstance(data, dict):
                return potential_from_dict(data).describe()
        except (DjangoValidationError, KeyError, TypeError, ValueError) as e:
            message = e.messages if isinstance(e, DjangoValidationError) else str(e)
            raise serializers.ValidationError(message)
        raise serializers.ValidationError("Potential must be a mapping or a string.")

    def to_representation(self, value: dict[str, Any]) -> dict[str, Any]:
        return value


class PacketSerializer(StrictSerializer):
    x0 = serializers.FloatField(required=False)
    k0 = serializers.FloatField()
    sigma = serializers.FloatField(required=False, min_value=0.0)
    delta = serializers.FloatField(required=False, min_value=0.0)
    weight = serializers.ListField(
        child=serializers.FloatField(), min_length=2, max_length=2, required=False
    )

    def validate(self, attrs: dict[str, Any]) -> dict[str, Any]:
        if "sigma" in attrs and "delta" in attrs:
            raise serializers.ValidationError("Give either sigma or delta, not both.")
        if attrs["k0"] <= 0:
            raise serializers.ValidationError({"k0": ["Mean wave number must be > 0."]})
        return attrs


class StateSerializer(PacketSerializer):
    k0 = serializers.FloatField(required=False)
    components = PacketSerializer(many=True, required=False)

    def validate(self, attrs: dict[str, Any]) -> dict[str, Any]:
        if "components" in attrs:
            if set(attrs) - {"components"}:
                raise serializers.ValidationError(
                    "A superposition is given by its components only."
                )
            return attrs
        if "k0" not in attrs:
            raise serializers.ValidationError({"k0": ["This field is required."]})
        if "weight" in attrs:
            raise serializers.ValidationError(
                {"weight": ["Only superposition components carry a weight."]}
            )
        return super().validate(attrs)


class GridsSerializer(StrictSerializer):
    k = RangeSerializer(required=False)
    t = RangeSerializer(required=False)
    t_d = RangeSerializer(required=False)
    x = RangeSerializer(required=False)


class MethodSerializer(StrictSerializer):
    arrival = serializers.ChoiceField(choices=ARRIVAL_METHODS, default="exact")
    tau = serializers.FloatField(required=False)
    nodes = serializers.IntegerField(required=False, min_value=8)
    sigma = serializers.ListField(
        child=serializers.FloatField(min_value=0.0), required=False, min_length=1
    )
    rough = serializers.BooleanField(default=False)
    pushforward_samples = serializers.IntegerField(default=0, min_value=0)
    case = serializers.ChoiceField(choices=sorted(CASES), required=False)
    grid_check = serializers.BooleanField(default=True)

    def validate_tau(self, value: float) -> float:
        if value <= 0:
            raise serializers.ValidationError("Smearing time must be positive.")
        return value


class OutputSerializer(StrictSerializer):
    directory = serializers.CharField(required=False)


class UnitsSerializer(StrictSerializer):
    length = serializers.FloatField(default=1.0)
    mass = serializers.FloatField(default=1.0)

    def validate(self, attrs: dict[str, Any]) -> dict[str, Any]:
        if attrs["length"] <= 0 or attrs["mass"] <= 0:
            raise serializers.ValidationError("Display scales must be positive.")
        return attrs


class SweepAxisSerializer(StrictSerializer):
    path = serializers.RegexField(r"^[a-z_]+\.[A-Za-z0-9_]+$")
    values = serializers.ListField(child=serializers.FloatField(), required=False)
    range = RangeSerializer(required=False)

    def validate(self, attrs: dict[str, Any]) -> dict[str, Any]:
        if ("values" in attrs) == ("range" in attrs):
            raise serializers.ValidationError(
                "A sweep axis takes either values or a range."
            )
        section = attrs["path"].split(".")[0]
        if section not in ("physics", "potential", "state", "method"):
            raise serializers.ValidationError(
                {"path": [f"Section '{section}' cannot be swept."]}
            )
        return attrs


class SweepSerializer(StrictSerializer):
    axes = SweepAxisSerializer(many=True)

    def validate_axes(self, value: list[dict[str, Any]]) -> list[dict[str, Any]]:
        if not value:
            raise serializers.ValidationError("A sweep needs at least one axis.")
        if len(value) > MAX_SWEEP_AXES:
            raise serializers.ValidationError(
                f"At most {MAX_SWEEP_AXES} axes can be swept."
            )
        paths = [axis["path"] for axis in value]
        if len(set(paths)) != len(paths):
            raise serializers.ValidationError("Sweep axes must be distinct.")
        return value


class TolerancesField(serializers.DictField):
    child = serializers.FloatField()

    def to_internal_value(self, data: Any) -> dict[str, float]:
        values = super().to_internal_value(data)
        unknown = sorted(set(values) - FIELD_NAMES)
        if unknown:
            raise serializers.ValidationError(
                {key: ["Unknown threshold."] for key in unknown}
            )
        defaults = Thresholds()
        for key, value in values.items():
            if isinstance(getattr(defaults, key), int):
                if not value.is_integer():
                    raise serializers.ValidationError({key: ["Must be an integer."]})
                values[key] = int(value)
        return values


class ExperimentConfigSerializer(StrictSerializer):
    """Schema of one experiment config document."""

    pipeline = serializers.ChoiceField(choices=PIPELINES)
    physics = PhysicsSerializer()
    potential = PotentialField(required=False)
    state = StateSerializer(required=False)
    grids = GridsSerializer()
    method = MethodSerializer()
    tolerances = TolerancesField()
    output = OutputSerializer()
    units = UnitsSerializer()
    sweep = SweepSerializer(required=False)
    force = serializers.BooleanField(default=False)

    def to_internal_value(self, data: Any) -> Any:
        # absent sections still go through validation so their defaults apply
        if isinstance(data, dict):
            data = {**{name: {} for name in DEFAULT_SECTIONS}, **data}
        return super().to_internal_value(data)

    def validate(self, attrs: dict[str, Any]) -> dict[str, Any]:
        missing = [
            path
            for path in REQUIRED_SECTIONS[attrs["pipeline"]]
            if not _has_path(attrs, path, swept=_swept_paths(attrs))
        ]
        if missing:
            raise serializers.ValidationError(
                {path: ["Required by this pipeline."] for path in missing}
            )
        state = attrs.get("state")
        if attrs["pipeline"] in ("arrival", "sequential") and state:
            packets = state.get("components", [state])
            for packet in packets:
                if "x0" not in packet or not ({"sigma", "delta"} & set(packet)):
                    raise serializers.ValidationError(
                        {"state": ["x0 and one of sigma or delta are required."]}
                    )
        return attrs


def _swept_paths(attrs: dict[str, Any]) -> set[str]:
    sweep = attrs.get("sweep") or {}
    return {axis["path"] for axis in sweep.get("axes", [])}


def _has_path(attrs: dict[str, Any], path: str, swept: set[str]) -> bool:
    if path in swept:
        return True
    node: Any = attrs
    for key in path.split("."):
        if not isinstance(node, dict) or key not in node:
            return False
        node = node[key]
    return True


class ExperimentRunSerializer(serializers.ModelSerializer):
    """Serializer for the ExperimentRun model."""

    pipeline_display = serializers.SerializerMethodField()
    status_display = serializers.SerializerMethodField()

    class Meta:
        model = ExperimentRun
        fields = "__all__"

    def get_pipeline_display(self, obj: ExperimentRun) -> str:
        return obj.get_pipeline_display()

    def get_status_display(self, obj: ExperimentRun) -> str:
        return obj.get_status_display()
