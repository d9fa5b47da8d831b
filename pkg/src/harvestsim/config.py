"""Run configuration: one structured YAML file, strict keys, manifests.

The file carries one section per module (geometry, plant, control, arm,
perception, harvest) plus the top-level seed.  Angles and units at this
boundary are degrees/mm/s/N; everything is converted to the radian-based
domain objects on load.  Unknown keys are rejected and every section is
validated against its module's invariants before any command runs.

Every command emits a RunManifest next to its outputs recording the config
hash, seed, and produced files, so a run can be reproduced byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import yaml

from . import __version__
from .arm import DEFAULT_VELOCITY_LIMIT, DhJoint, KinematicChain, PsoParams
from .control import ControlParams, PidGains
from .errors import ConfigInvalid
from .harvest import FailureRates, HarvestStage, StageTimingModel, TrialConfig
from .mechanism import GripperGeometry
from .perception import NoiseModel, SceneParams
from .plant import (
    ContactModel,
    FsrModel,
    ReferencePolicy,
    ServoModel,
    TomatoSample,
)

SECTIONS = ("geometry", "plant", "control", "arm", "perception", "harvest")


def _check_keys(section: str, data: dict, allowed: set[str]) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ConfigInvalid(
            f"{section}: unknown key(s) {sorted(unknown)}")


def _get(data: dict, key: str, default):
    value = data.get(key, default)
    if isinstance(default, float) and isinstance(value, int):
        value = float(value)
    return value


@dataclass
class RunConfig:
    geometry: GripperGeometry
    tomatoes: dict[str, TomatoSample]
    servo: ServoModel
    fsr: FsrModel
    contact: ContactModel
    gains: PidGains
    control_params: ControlParams
    dt: float
    reference: ReferencePolicy
    chain: KinematicChain
    velocity_limit: float
    pso: PsoParams
    noise: NoiseModel
    scene: SceneParams
    harvest: TrialConfig
    seed: int = 0

    # ------------------------------------------------------------------
    @classmethod
    def default(cls) -> "RunConfig":
        return cls.from_dict(cls._default_dict())

    @staticmethod
    def _default_dict() -> dict:
        from .arm import DEFAULT_CHAIN
        from .mechanism import REFERENCE_GEOMETRY
        from .plant import DEFAULT_TOMATOES

        geom = REFERENCE_GEOMETRY
        chain_rows = []
        for j in DEFAULT_CHAIN.joints:
            chain_rows.append({
                "a_mm": j.a, "alpha_deg": math.degrees(j.alpha),
                "d_mm": j.d, "offset_deg": math.degrees(j.offset),
                "limit_low_deg": math.degrees(j.limit_low),
                "limit_high_deg": math.degrees(j.limit_high)})
        tomatoes = [{"id": t.id, "mass_g": t.mass, "diameter_mm": t.diameter,
                     "stiffness_n_per_mm": t.stiffness,
                     "friction_mu": t.friction_mu}
                    for t in DEFAULT_TOMATOES.values()]
        return {
            "seed": 0,
            "geometry": {
                "r_mm": geom.r, "a_mm": geom.a, "b_mm": geom.b,
                "c_mm": geom.c, "d_mm": geom.d, "e_mm": geom.e,
                "f_mm": geom.f, "slider_offset_mm": geom.slider_offset,
                "pivot_height_mm": geom.pivot_height,
                "finger_arm_mm": geom.finger_arm,
                "gamma_deg": math.degrees(geom.gamma),
                "theta_min_deg": math.degrees(geom.theta_min),
                "theta_max_deg": math.degrees(geom.theta_max),
            },
            "plant": {
                "tomatoes": tomatoes,
                "servo": {"angle_min_deg": 0.0, "angle_max_deg": 180.0,
                          "max_rate_deg_per_s": 6.0, "time_constant_s": 0.1},
                "fsr": {"force_max_n": 2.0, "adc_bits": 10,
                        "noise_sigma_n": 0.001,
                        "cal_gain_n_per_count": 2.0 / 1023.0,
                        "cal_offset_counts": 0.0},
                "contact": {"engage_base_deg": 115.0,
                            "engage_slope_deg_per_mm": 0.3,
                            "deflection_mm_per_deg": 0.1,
                            "force_cap_n": 5.0},
            },
            "control": {
                "kp": 0.15, "ki": 0.02, "kd": 0.001, "dt_s": 0.01,
                "base_angle_deg": 96.0, "output_scale": 20000.0,
                "integral_clamp": 0.05, "deriv_filter_alpha": 0.1,
                "settle_band_n": 0.02,
                "reference": {"coeff": 0.60, "floor_n": 0.20,
                              "ceiling_n": 0.50},
            },
            "arm": {
                "chain": chain_rows,
                "velocity_limit_rad_per_s": DEFAULT_VELOCITY_LIMIT,
                "pso": {"particles": 30, "iterations": 200, "inertia": 0.72,
                        "cognitive": 1.49, "social": 1.49, "presample": 1000,
                        "direction_weight": 0.5, "limit_weight": 10.0,
                        "converged_cost_mm": 2.0},
            },
            "perception": {
                "noise": {"keypoint_sigma_mm": 0.0, "miss_rate": 0.0,
                          "false_positive_rate": 0.0,
                          "ripeness_confusion": 0.0,
                          "occlusion_miss_gain": 0.0},
                "scene": {"x_min_mm": -250.0, "x_max_mm": 250.0,
                          "y_min_mm": 150.0, "y_max_mm": 450.0,
                          "z_min_mm": 400.0, "z_max_mm": 800.0,
                          "radius_min_mm": 20.0, "radius_max_mm": 28.0,
                          "stem_offset_mm": 8.0, "stem_jitter_mm": 2.0,
                          "ripe_fraction": 0.7, "max_attempts": 1000},
            },
            "harvest": {
                "timing": {"approach_s": 6.0, "separation_s": 4.0,
                           "cutting_s": 3.0, "grasping_s": 4.0,
                           "departure_s": 5.0, "release_s": 2.34,
                           "sigma": 0.15, "total_cycle_mean_s": 24.34,
                           "diameter_scale": 0.0},
                "failure_rates": {
                    "pedicel_misalignment": 1.0 - 0.8 ** (1.0 / 3.0),
                    "keypoint_depth_error": 1.0 - 0.8 ** (1.0 / 3.0),
                    "transfer_slip": 1.0 - 0.8 ** (1.0 / 3.0)},
                "cutting_tol_mm": 5.0, "depth_window_mm": 10.0,
                "keypoint_sigma_mm": 1.0, "n_contacts": 6, "safety": 1.0,
                "slip_force_factor": 0.1,
                "q_home_deg": [0.0, -34.377467707849396, 57.29577951308232,
                               22.918311805232932, 0.0],
                "q_pick_deg": [28.64788975654116, 11.459155902616466,
                               34.377467707849396, -17.188733853924698,
                               11.459155902616466],
                "pick_point_mm": [0.0, 300.0, 600.0],
            },
        }

    # ------------------------------------------------------------------
    @classmethod
    def from_yaml(cls, path) -> "RunConfig":
        with open(path) as fh:
            data = yaml.safe_load(fh)
        if not isinstance(data, dict):
            raise ConfigInvalid("config file must contain a mapping")
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        _check_keys("config", data, set(SECTIONS) | {"seed"})
        for section in SECTIONS:
            if section not in data:
                raise ConfigInvalid(f"missing config section: {section}")

        g = data["geometry"]
        _check_keys("geometry", g, {
            "r_mm", "a_mm", "b_mm", "c_mm", "d_mm", "e_mm", "f_mm",
            "slider_offset_mm", "pivot_height_mm", "finger_arm_mm",
            "gamma_deg", "theta_min_deg", "theta_max_deg"})
        geometry = GripperGeometry(
            r=_get(g, "r_mm", 15.0), a=_get(g, "a_mm", 40.0),
            b=_get(g, "b_mm", 10.0), c=_get(g, "c_mm", 25.0),
            d=_get(g, "d_mm", 35.0), e=_get(g, "e_mm", 30.0),
            f=_get(g, "f_mm", 20.0),
            slider_offset=_get(g, "slider_offset_mm", 12.0),
            pivot_height=_get(g, "pivot_height_mm", 18.0),
            finger_arm=_get(g, "finger_arm_mm", 45.0),
            gamma=math.radians(_get(g, "gamma_deg", math.degrees(0.35))),
            theta_min=math.radians(_get(g, "theta_min_deg", 0.0)),
            theta_max=math.radians(_get(g, "theta_max_deg", math.degrees(1.2))))

        p = data["plant"]
        _check_keys("plant", p, {"tomatoes", "servo", "fsr", "contact"})
        tomatoes: dict[str, TomatoSample] = {}
        for row in p.get("tomatoes", []):
            _check_keys("plant.tomatoes", row, {
                "id", "mass_g", "diameter_mm", "stiffness_n_per_mm",
                "friction_mu"})
            try:
                sample = TomatoSample(
                    id=str(row["id"]), mass=float(row["mass_g"]),
                    diameter=float(row["diameter_mm"]),
                    stiffness=float(row["stiffness_n_per_mm"]),
                    friction_mu=float(row["friction_mu"]))
                sample.validate()
            except (KeyError, ValueError) as exc:
                raise ConfigInvalid(f"plant.tomatoes: {exc}") from exc
            tomatoes[sample.id] = sample
        if not tomatoes:
            raise ConfigInvalid("plant.tomatoes: at least one sample required")
        s = p.get("servo", {})
        _check_keys("plant.servo", s, {
            "angle_min_deg", "angle_max_deg", "max_rate_deg_per_s",
            "time_constant_s"})
        servo = ServoModel(
            angle_min=_get(s, "angle_min_deg", 0.0),
            angle_max=_get(s, "angle_max_deg", 180.0),
            max_rate=_get(s, "max_rate_deg_per_s", 6.0),
            time_constant=_get(s, "time_constant_s", 0.1))
        fz = p.get("fsr", {})
        _check_keys("plant.fsr", fz, {
            "force_max_n", "adc_bits", "noise_sigma_n",
            "cal_gain_n_per_count", "cal_offset_counts"})
        fsr = FsrModel(
            force_max=_get(fz, "force_max_n", 2.0),
            adc_bits=int(_get(fz, "adc_bits", 10)),
            noise_sigma=_get(fz, "noise_sigma_n", 0.001),
            cal_gain=_get(fz, "cal_gain_n_per_count", 2.0 / 1023.0),
            cal_offset=_get(fz, "cal_offset_counts", 0.0))
        ct = p.get("contact", {})
        _check_keys("plant.contact", ct, {
            "engage_base_deg", "engage_slope_deg_per_mm",
            "deflection_mm_per_deg", "force_cap_n"})
        contact = ContactModel(
            engage_base=_get(ct, "engage_base_deg", 115.0),
            engage_slope=_get(ct, "engage_slope_deg_per_mm", 0.3),
            deflection_per_deg=_get(ct, "deflection_mm_per_deg", 0.1),
            force_cap=_get(ct, "force_cap_n", 5.0))

        c = data["control"]
        _check_keys("control", c, {
            "kp", "ki", "kd", "dt_s", "base_angle_deg", "output_scale",
            "integral_clamp", "deriv_filter_alpha", "settle_band_n",
            "reference"})
        gains = PidGains(kp=_get(c, "kp", 0.15), ki=_get(c, "ki", 0.02),
                         kd=_get(c, "kd", 0.001))
        control_params = ControlParams(
            base_angle=_get(c, "base_angle_deg", 96.0),
            output_scale=_get(c, "output_scale", 20000.0),
            integral_clamp=_get(c, "integral_clamp", 0.05),
            deriv_filter_alpha=_get(c, "deriv_filter_alpha", 0.1),
            settle_band=_get(c, "settle_band_n", 0.02))
        dt = _get(c, "dt_s", 0.01)
        ref = c.get("reference", {})
        _check_keys("control.reference", ref, {"coeff", "floor_n", "ceiling_n"})
        reference = ReferencePolicy(
            coeff=_get(ref, "coeff", 0.60),
            floor=_get(ref, "floor_n", 0.20),
            ceiling=_get(ref, "ceiling_n", 0.50))

        a = data["arm"]
        _check_keys("arm", a, {"chain", "velocity_limit_rad_per_s", "pso"})
        rows = a.get("chain", [])
        if len(rows) != 5:
            raise ConfigInvalid("arm.chain: exactly 5 joint rows required")
        joints = []
        for row in rows:
            _check_keys("arm.chain", row, {
                "a_mm", "alpha_deg", "d_mm", "offset_deg", "limit_low_deg",
                "limit_high_deg"})
            joints.append(DhJoint(
                a=_get(row, "a_mm", 0.0),
                alpha=math.radians(_get(row, "alpha_deg", 0.0)),
                d=_get(row, "d_mm", 0.0),
                offset=math.radians(_get(row, "offset_deg", 0.0)),
                limit_low=math.radians(_get(row, "limit_low_deg", -180.0)),
                limit_high=math.radians(_get(row, "limit_high_deg", 180.0))))
        chain = KinematicChain(joints=tuple(joints))
        velocity_limit = _get(a, "velocity_limit_rad_per_s",
                              DEFAULT_VELOCITY_LIMIT)
        ps = a.get("pso", {})
        _check_keys("arm.pso", ps, {
            "particles", "iterations", "inertia", "cognitive", "social",
            "presample", "direction_weight", "limit_weight",
            "converged_cost_mm"})
        pso = PsoParams(
            particle_count=int(_get(ps, "particles", 30)),
            iteration_count=int(_get(ps, "iterations", 200)),
            inertia=_get(ps, "inertia", 0.72),
            cognitive=_get(ps, "cognitive", 1.49),
            social=_get(ps, "social", 1.49),
            presample=int(_get(ps, "presample", 1000)),
            direction_weight=_get(ps, "direction_weight", 0.5),
            limit_weight=_get(ps, "limit_weight", 10.0),
            converged_cost=_get(ps, "converged_cost_mm", 2.0))

        pc = data["perception"]
        _check_keys("perception", pc, {"noise", "scene"})
        nz = pc.get("noise", {})
        _check_keys("perception.noise", nz, {
            "keypoint_sigma_mm", "miss_rate", "false_positive_rate",
            "ripeness_confusion", "occlusion_miss_gain"})
        noise = NoiseModel(
            keypoint_sigma=_get(nz, "keypoint_sigma_mm", 0.0),
            miss_rate=_get(nz, "miss_rate", 0.0),
            false_positive_rate=_get(nz, "false_positive_rate", 0.0),
            ripeness_confusion=_get(nz, "ripeness_confusion", 0.0),
            occlusion_miss_gain=_get(nz, "occlusion_miss_gain", 0.0))
        sc = pc.get("scene", {})
        _check_keys("perception.scene", sc, {
            "x_min_mm", "x_max_mm", "y_min_mm", "y_max_mm", "z_min_mm",
            "z_max_mm", "radius_min_mm", "radius_max_mm", "stem_offset_mm",
            "stem_jitter_mm", "ripe_fraction", "max_attempts"})
        scene = SceneParams(
            x_range=(_get(sc, "x_min_mm", -250.0), _get(sc, "x_max_mm", 250.0)),
            y_range=(_get(sc, "y_min_mm", 150.0), _get(sc, "y_max_mm", 450.0)),
            z_range=(_get(sc, "z_min_mm", 400.0), _get(sc, "z_max_mm", 800.0)),
            radius_range=(_get(sc, "radius_min_mm", 20.0),
                          _get(sc, "radius_max_mm", 28.0)),
            stem_offset=_get(sc, "stem_offset_mm", 8.0),
            stem_jitter=_get(sc, "stem_jitter_mm", 2.0),
            ripe_fraction=_get(sc, "ripe_fraction", 0.7),
            max_attempts=int(_get(sc, "max_attempts", 1000)))

        h = data["harvest"]
        _check_keys("harvest", h, {
            "timing", "failure_rates", "cutting_tol_mm", "depth_window_mm",
            "keypoint_sigma_mm", "n_contacts", "safety", "slip_force_factor",
            "q_home_deg", "q_pick_deg", "pick_point_mm"})
        tm = h.get("timing", {})
        _check_keys("harvest.timing", tm, {
            "approach_s", "separation_s", "cutting_s", "grasping_s",
            "departure_s", "release_s", "sigma", "total_cycle_mean_s",
            "diameter_scale"})
        timing = StageTimingModel(
            means={
                HarvestStage.APPROACH: _get(tm, "approach_s", 6.0),
                HarvestStage.SEPARATION: _get(tm, "separation_s", 4.0),
                HarvestStage.CUTTING: _get(tm, "cutting_s", 3.0),
                HarvestStage.GRASPING: _get(tm, "grasping_s", 4.0),
                HarvestStage.DEPARTURE: _get(tm, "departure_s", 5.0),
                HarvestStage.RELEASE: _get(tm, "release_s", 2.34),
            },
            sigma=_get(tm, "sigma", 0.15),
            total_cycle_mean=_get(tm, "total_cycle_mean_s", 24.34),
            diameter_scale=_get(tm, "diameter_scale", 0.0))
        fr = h.get("failure_rates", {})
        _check_keys("harvest.failure_rates", fr, {
            "pedicel_misalignment", "keypoint_depth_error", "transfer_slip"})
        p_default = 1.0 - 0.8 ** (1.0 / 3.0)
        rates = FailureRates(
            pedicel_misalignment=_get(fr, "pedicel_misalignment", p_default),
            keypoint_depth_error=_get(fr, "keypoint_depth_error", p_default),
            transfer_slip=_get(fr, "transfer_slip", p_default))
        q_home = tuple(math.radians(float(v))
                       for v in h.get("q_home_deg", [0.0, -34.377467707849396,
                                                     57.29577951308232,
                                                     22.918311805232932, 0.0]))
        q_pick = tuple(math.radians(float(v))
                       for v in h.get("q_pick_deg", [28.64788975654116,
                                                     11.459155902616466,
                                                     34.377467707849396,
                                                     -17.188733853924698,
                                                     11.459155902616466]))
        pick_point = tuple(float(v)
                           for v in h.get("pick_point_mm", [0.0, 300.0, 600.0]))
        if len(pick_point) != 3:
            raise ConfigInvalid("harvest.pick_point_mm must have 3 entries")
        trial = TrialConfig(
            timing=timing, failure_rates=rates,
            cutting_tol=_get(h, "cutting_tol_mm", 5.0),
            depth_window=_get(h, "depth_window_mm", 10.0),
            keypoint_sigma=_get(h, "keypoint_sigma_mm", 1.0),
            gains=gains, control_params=control_params, servo=servo,
            fsr=fsr, contact=contact, reference=reference, dt=dt,
            n_contacts=int(_get(h, "n_contacts", 6)),
            safety=_get(h, "safety", 1.0),
            slip_force_factor=_get(h, "slip_force_factor", 0.1),
            chain=chain, q_home=q_home, q_pick=q_pick,
            velocity_limit=velocity_limit, pick_point=pick_point)

        seed = int(data.get("seed", 0))

        config = cls(geometry=geometry, tomatoes=tomatoes, servo=servo,
                     fsr=fsr, contact=contact, gains=gains,
                     control_params=control_params, dt=dt,
                     reference=reference, chain=chain,
                     velocity_limit=velocity_limit, pso=pso, noise=noise,
                     scene=scene, harvest=trial, seed=seed)
        config.validate()
        return config

    # ------------------------------------------------------------------
    def validate(self) -> None:
        try:
            self.geometry.validate()
        except Exception as exc:
            raise ConfigInvalid(f"geometry: {exc}") from exc
        for name, obj in (("plant.servo", self.servo),
                          ("plant.fsr", self.fsr),
                          ("plant.contact", self.contact),
                          ("control", self.gains),
                          ("control", self.control_params),
                          ("arm.chain", self.chain),
                          ("arm.pso", self.pso),
                          ("perception.noise", self.noise)):
            try:
                obj.validate()
            except ValueError as exc:
                raise ConfigInvalid(f"{name}: {exc}") from exc
        if self.dt <= 0.0:
            raise ConfigInvalid("control.dt_s must be > 0")
        try:
            self.harvest.validate()
        except ConfigInvalid as exc:
            raise ConfigInvalid(f"harvest: {exc}") from exc

    # ------------------------------------------------------------------
    def to_dict(self) -> dict:
        """Canonical boundary-unit dict (stable ordering for hashing)."""
        geom = self.geometry
        out = {
            "seed": self.seed,
            "geometry": {
                "r_mm": geom.r, "a_mm": geom.a, "b_mm": geom.b,
                "c_mm": geom.c, "d_mm": geom.d, "e_mm": geom.e,
                "f_mm": geom.f, "slider_offset_mm": geom.slider_offset,
                "pivot_height_mm": geom.pivot_height,
                "finger_arm_mm": geom.finger_arm,
                "gamma_deg": math.degrees(geom.gamma),
                "theta_min_deg": math.degrees(geom.theta_min),
                "theta_max_deg": math.degrees(geom.theta_max),
            },
            "plant": {
                "tomatoes": [
                    {"id": t.id, "mass_g": t.mass, "diameter_mm": t.diameter,
                     "stiffness_n_per_mm": t.stiffness,
                     "friction_mu": t.friction_mu}
                    for t in self.tomatoes.values()],
                "servo": {"angle_min_deg": self.servo.angle_min,
                          "angle_max_deg": self.servo.angle_max,
                          "max_rate_deg_per_s": self.servo.max_rate,
                          "time_constant_s": self.servo.time_constant},
                "fsr": {"force_max_n": self.fsr.force_max,
                        "adc_bits": self.fsr.adc_bits,
                        "noise_sigma_n": self.fsr.noise_sigma,
                        "cal_gain_n_per_count": self.fsr.cal_gain,
                        "cal_offset_counts": self.fsr.cal_offset},
                "contact": {"engage_base_deg": self.contact.engage_base,
                            "engage_slope_deg_per_mm": self.contact.engage_slope,
                            "deflection_mm_per_deg": self.contact.deflection_per_deg,
                            "force_cap_n": self.contact.force_cap},
            },
            "control": {
                "kp": self.gains.kp, "ki": self.gains.ki, "kd": self.gains.kd,
                "dt_s": self.dt,
                "base_angle_deg": self.control_params.base_angle,
                "output_scale": self.control_params.output_scale,
                "integral_clamp": self.control_params.integral_clamp,
                "deriv_filter_alpha": self.control_params.deriv_filter_alpha,
                "settle_band_n": self.control_params.settle_band,
                "reference": {"coeff": self.reference.coeff,
                              "floor_n": self.reference.floor,
                              "ceiling_n": self.reference.ceiling},
            },
            "arm": {
                "chain": [
                    {"a_mm": j.a, "alpha_deg": math.degrees(j.alpha),
                     "d_mm": j.d, "offset_deg": math.degrees(j.offset),
                     "limit_low_deg": math.degrees(j.limit_low),
                     "limit_high_deg": math.degrees(j.limit_high)}
                    for j in self.chain.joints],
                "velocity_limit_rad_per_s": self.velocity_limit,
                "pso": {"particles": self.pso.particle_count,
                        "iterations": self.pso.iteration_count,
                        "inertia": self.pso.inertia,
                        "cognitive": self.pso.cognitive,
                        "social": self.pso.social,
                        "presample": self.pso.presample,
                        "direction_weight": self.pso.direction_weight,
                        "limit_weight": self.pso.limit_weight,
                        "converged_cost_mm": self.pso.converged_cost},
            },
            "perception": {
                "noise": {"keypoint_sigma_mm": self.noise.keypoint_sigma,
                          "miss_rate": self.noise.miss_rate,
                          "false_positive_rate": self.noise.false_positive_rate,
                          "ripeness_confusion": self.noise.ripeness_confusion,
                          "occlusion_miss_gain": self.noise.occlusion_miss_gain},
                "scene": {"x_min_mm": self.scene.x_range[0],
                          "x_max_mm": self.scene.x_range[1],
                          "y_min_mm": self.scene.y_range[0],
                          "y_max_mm": self.scene.y_range[1],
                          "z_min_mm": self.scene.z_range[0],
                          "z_max_mm": self.scene.z_range[1],
                          "radius_min_mm": self.scene.radius_range[0],
                          "radius_max_mm": self.scene.radius_range[1],
                          "stem_offset_mm": self.scene.stem_offset,
                          "stem_jitter_mm": self.scene.stem_jitter,
                          "ripe_fraction": self.scene.ripe_fraction,
                          "max_attempts": self.scene.max_attempts},
            },
            "harvest": {
                "timing": {
                    "approach_s": self.harvest.timing.means[HarvestStage.APPROACH],
                    "separation_s": self.harvest.timing.means[HarvestStage.SEPARATION],
                    "cutting_s": self.harvest.timing.means[HarvestStage.CUTTING],
                    "grasping_s": self.harvest.timing.means[HarvestStage.GRASPING],
                    "departure_s": self.harvest.timing.means[HarvestStage.DEPARTURE],
                    "release_s": self.harvest.timing.means[HarvestStage.RELEASE],
                    "sigma": self.harvest.timing.sigma,
                    "total_cycle_mean_s": self.harvest.timing.total_cycle_mean,
                    "diameter_scale": self.harvest.timing.diameter_scale},
                "failure_rates": {
                    "pedicel_misalignment": self.harvest.failure_rates.pedicel_misalignment,
                    "keypoint_depth_error": self.harvest.failure_rates.keypoint_depth_error,
                    "transfer_slip": self.harvest.failure_rates.transfer_slip},
                "cutting_tol_mm": self.harvest.cutting_tol,
                "depth_window_mm": self.harvest.depth_window,
                "keypoint_sigma_mm": self.harvest.keypoint_sigma,
                "n_contacts": self.harvest.n_contacts,
                "safety": self.harvest.safety,
                "slip_force_factor": self.harvest.slip_force_factor,
                "q_home_deg": [math.degrees(v) for v in self.harvest.q_home],
                "q_pick_deg": [math.degrees(v) for v in self.harvest.q_pick],
                "pick_point_mm": list(self.harvest.pick_point),
            },
        }
        return out

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    def hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True,
                               separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


@dataclass
class RunManifest:
    """Provenance record written next to every command's outputs."""

    config_sha256: str
    seed: int
    version: str
    command: str
    outputs: list[str]

    @classmethod
    def for_run(cls, config: RunConfig, command: str,
                outputs: list) -> "RunManifest":
        # file names only: outputs sit next to the manifest, and recording
        # absolute paths would break byte-identical re-runs elsewhere
        from pathlib import Path

        return cls(config_sha256=config.hash(), seed=config.seed,
                   version=__version__, command=command,
                   outputs=sorted(Path(p).name for p in outputs))

    def write(self, path) -> None:
        with open(path, "w") as fh:
            json.dump({
                "config_sha256": self.config_sha256,
                "seed": self.seed,
                "version": self.version,
                "command": self.command,
                "outputs": self.outputs,
            }, fh, indent=2, sort_keys=True)
            fh.write("\n")
