"""Model archive: a directory of GPOT tensors plus ``manifest.txt``.

The manifest holds scalars, shapes, digests and the experiment config
snapshot (keys prefixed ``config.``). A probe input and the prediction made
at save time are stored so a load can be checked bit for bit.
"""

from pathlib import Path

import numpy as np

from ..errors import ContainerError, ValidationError
from . import container, kvtext

FORMAT_VERSION = 1


def _ints(s):
    return tuple(int(v) for v in str(s).split(",") if v != "")


def save_model(model, path, probe=None):
    from ..posterior import predict_mean

    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    fm = model.feature_map
    tensors = {f"wno.{k}": v for k, v in fm.params.items()}
    tensors.update({
        "hyper": model.hyper.as_array(),
        "weights": model.weights,
        "targets": model.U,
        "features": model.cache.features,
        "target_mean": model.transform.mean,
        "input_mean": fm.in_mean,
        "input_std": fm.in_std,
    })
    if probe is not None:
        probe = np.asarray(probe, dtype=np.float64)
        tensors["probe_input"] = probe
        tensors["probe_prediction"] = predict_mean(model, probe)
    for name, arr in tensors.items():
        container.write(path / f"{name}.gpot", arr)
    sc = model.sdd_config
    manifest = dict(
        format_version=FORMAT_VERSION,
        tensors=sorted(tensors),
        kernel=model.hyper.kind,
        target_scale=model.transform.scale,
        target_shape=list(model.target_shape),
        cache_weight=model.cache.weight,
        cache_field_shape=list(model.cache.field_shape),
        cache_params_digest=model.cache.params_digest,
        cache_dataset_digest=model.cache.dataset_digest,
        cache_fingerprint=model.cache.fingerprint,
        extents=list(fm.extents),
        boundary=fm.boundary,
    )
    manifest.update({f"wno_config.{k}": v for k, v in fm.config.to_dict().items()})
    if sc is not None:
        manifest.update({f"sdd.{k}": getattr(sc, k) for k in
                         ("steps", "batch", "beta", "rho", "r", "seed", "normalize_step")})
    for k, v in model.provenance.get("config", {}).items():
        manifest[f"config.{k}"] = v
    if "dataset" in model.provenance:
        manifest["dataset_digest"] = model.provenance["dataset"]
    kvtext.write(path / "manifest.txt", manifest, header=["GPO model archive"])
    return path


def _bool(s):
    return str(s).lower() in ("true", "1", "yes")


def load_model(path, verify=True):
    from ..kernel import KernelHyper, LatentCache
    from ..posterior import GpoModel, TargetTransform, predict_mean
    from ..sdd import SddConfig
    from ..wno import FeatureMap, WnoConfig

    path = Path(path)
    m = kvtext.read(path / "manifest.txt")
    if int(m.get("format_version", -1)) != FORMAT_VERSION:
        raise ContainerError(f"unsupported archive format {m.get('format_version')!r}",
                             path / "manifest.txt")
    names = [n for n in m["tensors"].split(",") if n]
    t = {n: container.read(path / f"{n}.gpot") for n in names}
    wc = {k.split(".", 1)[1]: v for k, v in m.items() if k.startswith("wno_config.")}
    wcfg = WnoConfig(width=int(wc["width"]), layers=int(wc["layers"]), basis=wc["basis"],
                     levels=int(wc["levels"]), d_lat=int(wc["d_lat"]), ndim=int(wc["ndim"]),
                     in_channels=int(wc["in_channels"]), resolution=int(wc["resolution"]),
                     use_grid=_bool(wc["use_grid"]), activation=wc["activation"])
    params = {n[4:]: t[n] for n in names if n.startswith("wno.")}
    extents = tuple(float(e) for e in m["extents"].split(","))
    fm = FeatureMap(wcfg, params, extents, m["boundary"], t["input_mean"], t["input_std"])
    lh = t["hyper"]
    hyper = KernelHyper(float(lh[0]), float(lh[1]), float(lh[2]), m["kernel"])
    cache = LatentCache(t["features"], _ints(m["cache_field_shape"]), float(m["cache_weight"]),
                        m["cache_params_digest"], m.get("cache_dataset_digest", ""))
    if cache.params_digest != fm.digest():
        raise ValidationError("archive latent cache does not match the stored operator parameters")
    sc = None
    if "sdd.steps" in m:
        sc = SddConfig(steps=int(m["sdd.steps"]), batch=int(m["sdd.batch"]), beta=float(m["sdd.beta"]),
                       rho=float(m["sdd.rho"]), r=float(m["sdd.r"]), seed=int(m["sdd.seed"]),
                       normalize_step=_bool(m["sdd.normalize_step"]))
    cfg = {k[7:]: v for k, v in m.items() if k.startswith("config.")}
    prov = dict(config=cfg)
    if "dataset_digest" in m:
        prov["dataset"] = m["dataset_digest"]
    model = GpoModel(fm, hyper, cache, t["weights"], t["targets"],
                     TargetTransform(t["target_mean"], float(m["target_scale"])),
                     _ints(m["target_shape"]), sc, prov)
    if verify and "probe_input" in t:
        again = predict_mean(model, t["probe_input"])
        if not np.array_equal(again, t["probe_prediction"]):
            raise ValidationError("archive probe prediction is not reproduced bit for bit")
    return model
