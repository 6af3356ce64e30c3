"""Experiment configuration: the resolved optical setup and its file format.

Config files are flat TOML tables. Every key carries its unit in the name
(``wavelength_nm``, ``beta_u_deg`` ...); anything not listed in ``SCHEMA`` is
rejected. Internally all quantities are SI and angles are radians.
"""

from dataclasses import dataclass, field, replace, asdict
import hashlib
import json
import math

import numpy as np

from .constants import ATTOSECOND, DEG
from .detector import NoiseProfile
from .polarization import angular_frequency, postselection_probability

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


# Post-selection angle -> exposure time used for that angle in the experiment.
EXPOSURE_TABLE = {1.6: 650e-6, 3.3: 300e-6, 6.6: 100e-6, 45.0: 60e-6}
BASELINE_POWER = 7.3e-6
PRESELECTION_POWER = 2.0e-3
FIGURE_BETAS_DEG = (1.6, 3.3, 6.6, 45.0)


@dataclass(frozen=True)
class OpticalSetup:
    wavelength: float = 632.992e-9
    beam_diameter: float = 0.65e-3
    slit_gap: float = 5e-3
    slit_width: float = 50e-6
    f1: float = 25.5e-3
    f2: float = 300e-3
    f3: float = 300e-3
    f4: float = 25.5e-3
    detector_focal: float = 1.0
    n0: float = 1.54
    beta_u: float = 1.6 * DEG
    beta_d: float = -1.6 * DEG
    theta_list: tuple = tuple(np.linspace(0.0, 10.0, 10) * DEG)
    power: float | None = None
    exposure: float | None = None
    eta: float = 0.6
    pixel_pitch: float = 3.45e-6
    ccd_rows: int = 2000
    ccd_cols: int = 405
    t0: float = 0.0
    visibility: float = 1.0
    sigma_t: float = 1e-9
    noise: NoiseProfile = field(default_factory=NoiseProfile)
    seed: int = 0
    upsampling: int = 10_000
    grid_nx: int = 256
    grid_ny: int = 8192
    snr_group_size: int = 25

    @property
    def omega(self):
        return angular_frequency(self.wavelength)

    @property
    def expander_magnification(self):
        return self.f2 / self.f1

    @property
    def reducer_magnification(self):
        return self.f4 / self.f3

    def resolved_exposure(self):
        if self.exposure is not None:
            return self.exposure
        key = round(abs(self.beta_u) / DEG, 2)
        try:
            return EXPOSURE_TABLE[key]
        except KeyError:
            raise ConfigError([
                f"no default exposure for |beta_u| = {key} deg; set exposure_us"
            ]) from None

    def resolved_power(self):
        """Optical power at the CCD.

        Defaults to the measured baseline power at +-45 deg, otherwise the
        pre-selection power times the mean analytic post-selection
        probability of the two arms.
        """
        if self.power is not None:
            return self.power
        if math.isclose(abs(self.beta_u), 45 * DEG) and math.isclose(abs(self.beta_d), 45 * DEG):
            return BASELINE_POWER
        prob = 0.5 * (postselection_probability(self.beta_u) + postselection_probability(self.beta_d))
        return PRESELECTION_POWER * prob

    def with_betas(self, beta_deg):
        """Copy with the symmetric pair (+beta, -beta) and its default budget."""
        return replace(self, beta_u=beta_deg * DEG, beta_d=-beta_deg * DEG,
                       exposure=None, power=None)

    def to_config_dict(self):
        """Setup in config-file units (degrees, nm, ...), as echoed in manifests."""
        out = {}
        for key, (attr, scale, _) in SCHEMA.items():
            if attr.startswith("noise."):
                value = getattr(self.noise, attr.split(".", 1)[1])
            else:
                value = getattr(self, attr)
            if value is None:
                continue
            if isinstance(value, tuple):
                out[key] = [_clean(v / scale) for v in value]
            elif isinstance(value, int) and scale == 1:
                out[key] = value
            else:
                out[key] = _clean(value / scale)
        return out

    def digest(self):
        blob = json.dumps(self.to_config_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _clean(x):
    # round-trip through repr keeps manifests stable across platforms
    return float(f"{x:.15g}")


# config key -> (attribute, SI per config unit, python type)
SCHEMA = {
    "wavelength_nm": ("wavelength", 1e-9, float),
    "beam_diameter_mm": ("beam_diameter", 1e-3, float),
    "slit_gap_mm": ("slit_gap", 1e-3, float),
    "slit_width_mm": ("slit_width", 1e-3, float),
    "f1_mm": ("f1", 1e-3, float),
    "f2_mm": ("f2", 1e-3, float),
    "f3_mm": ("f3", 1e-3, float),
    "f4_mm": ("f4", 1e-3, float),
    "detector_focal_m": ("detector_focal", 1.0, float),
    "n0": ("n0", 1.0, float),
    "beta_u_deg": ("beta_u", DEG, float),
    "beta_d_deg": ("beta_d", DEG, float),
    "theta_list_deg": ("theta_list", DEG, list),
    "power_uw": ("power", 1e-6, float),
    "exposure_us": ("exposure", 1e-6, float),
    "eta": ("eta", 1.0, float),
    "pixel_pitch_um": ("pixel_pitch", 1e-6, float),
    "ccd_rows": ("ccd_rows", 1, int),
    "ccd_cols": ("ccd_cols", 1, int),
    "t0_as": ("t0", ATTOSECOND, float),
    "visibility": ("visibility", 1.0, float),
    "sigma_t_ns": ("sigma_t", 1e-9, float),
    "gain_jitter_rms": ("noise.gain_jitter_rms", 1.0, float),
    "pointing_jitter_rms_um": ("noise.pointing_jitter_rms", 1e-6, float),
    "dark_rate_per_s": ("noise.dark_rate", 1.0, float),
    "seed": ("seed", 1, int),
    "upsampling": ("upsampling", 1, int),
    "grid_nx": ("grid_nx", 1, int),
    "grid_ny": ("grid_ny", 1, int),
    "snr_group_size": ("snr_group_size", 1, int),
}

_POSITIVE = ("wavelength", "beam_diameter", "slit_gap", "slit_width", "f1", "f2", "f3", "f4",
             "detector_focal", "n0", "pixel_pitch", "sigma_t", "ccd_rows", "ccd_cols",
             "upsampling", "grid_nx", "grid_ny", "snr_group_size")


def validate(setup):
    """Return every invariant violation of ``setup`` (empty list when valid)."""
    problems = []
    for attr in _POSITIVE:
        if not getattr(setup, attr) > 0:
            problems.append(f"{_key_for(attr)}: must be positive, got {getattr(setup, attr)!r}")
    for attr in ("power", "exposure"):
        value = getattr(setup, attr)
        if value is not None and not value > 0:
            problems.append(f"{_key_for(attr)}: must be positive, got {value!r}")
    if not 0 < setup.eta <= 1:
        problems.append(f"eta: must lie in (0, 1], got {setup.eta!r}")
    if not 0 <= setup.visibility <= 1:
        problems.append(f"visibility: must lie in [0, 1], got {setup.visibility!r}")
    for attr in ("beta_u", "beta_d"):
        if abs(getattr(setup, attr)) > math.pi / 2:
            problems.append(f"{_key_for(attr)}: |beta| must not exceed 90 deg")
    thetas = setup.theta_list
    if len(thetas) == 0:
        problems.append("theta_list_deg: must not be empty")
    elif any(b <= a for a, b in zip(thetas, thetas[1:])):
        problems.append("theta_list_deg: must be strictly increasing")
    if any(abs(t) >= 0.5 for t in thetas):
        problems.append("theta_list_deg: tilts must stay below 0.5 rad (28.6 deg)")
    if not math.isfinite(setup.t0):
        problems.append("t0_as: must be finite")
    for attr in ("gain_jitter_rms", "pointing_jitter_rms", "dark_rate"):
        if not getattr(setup.noise, attr) >= 0:
            problems.append(f"{_key_for('noise.' + attr)}: must be >= 0")
    return problems


def _key_for(attr):
    for key, (a, _, _) in SCHEMA.items():
        if a == attr:
            return key
    return attr


def setup_from_mapping(mapping):
    """Build and validate an ``OpticalSetup`` from config-unit key/values."""
    problems = []
    kwargs, noise = {}, {}
    for key, value in mapping.items():
        if key not in SCHEMA:
            problems.append(f"{key}: unknown key")
            continue
        attr, scale, kind = SCHEMA[key]
        if kind is list:
            if not isinstance(value, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
                problems.append(f"{key}: expected a list of numbers")
                continue
            converted = tuple(float(v) * scale for v in value)
        elif kind is int:
            if not isinstance(value, int) or isinstance(value, bool):
                problems.append(f"{key}: expected an integer, got {value!r}")
                continue
            converted = value
        else:
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                problems.append(f"{key}: expected a number, got {value!r}")
                continue
            converted = float(value) * scale
        if attr.startswith("noise."):
            noise[attr.split(".", 1)[1]] = converted
        else:
            kwargs[attr] = converted
    if problems:
        raise ConfigError(problems)
    keys = {attr.split(".", 1)[1]: key for key, (attr, _, _) in SCHEMA.items()
            if attr.startswith("noise.")}
    for name, value in list(noise.items()):
        if not value >= 0:
            problems.append(f"{keys[name]}: must be >= 0, got {mapping[keys[name]]!r}")
            del noise[name]
    setup = OpticalSetup(noise=NoiseProfile(**noise), **kwargs)
    problems += validate(setup)
    if problems:
        raise ConfigError(problems)
    return setup


def load_config(path):
    """Read a flat TOML config; missing keys take the experimental defaults.

    Raises
    ------
    ConfigError
        On a TOML syntax error (message carries the line number), unknown
        keys, wrong types, or any invariant violation (all listed).
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        mapping = tomllib.loads(raw.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"{path}: parse error: {exc}"]) from None
    nested = [k for k, v in mapping.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError([f"{k}: tables are not allowed; the config is a flat key/value list" for k in nested])
    return setup_from_mapping(mapping)


def setup_as_dict(setup):
    return asdict(setup)
