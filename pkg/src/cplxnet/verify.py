"""Property suites behind the `verify` subcommand.

Each suite returns (passed, report_lines). They are the same checks the
test suite runs, packaged for the command line: gradient oracles against
central finite differences, whitening statistics, initializer statistics,
parameter budgets, and the ellipticity stress harness.
"""

from __future__ import annotations

import numpy as np

from .activations import crelu, modrelu, record_masks, zrelu
from .autograd import Parameter, Tensor, finite_difference_grad
from .cbn import ComplexBatchNorm, ellipticity_harness
from .conv import ComplexConv2d, ComplexDense
from .convlstm import ConvLstmCell, unroll
from .ctensor import ComplexTensor
from .resnet import ModelSpec, NAMED_CONFIGS, build_model
from .init import InitSpec, rayleigh_complex_init, unitary_complex_init

GRAD_TOL = 1e-4
FD_STEP = 1e-3


def max_rel_error(analytic, numeric):
    err = 0.0
    for a, b in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)
        err = max(err, float(np.max(np.abs(a - b) / denom)))
    return err


def check_op_gradient(params, forward, step=FD_STEP):
    """Backward pass vs the finite-difference oracle for one loss closure."""
    for p in params:
        p.zero_grad()
    loss = forward()
    loss.backward()
    analytic = []
    for p in params:
        analytic.extend(p.grad_arrays())
    numeric = finite_difference_grad(lambda: forward().item(), params, step=step)
    return max_rel_error(analytic, numeric)


def _projection_loss(rng, out):
    """Scalar loss: fixed random projection of a (complex) output."""
    if isinstance(out, ComplexTensor):
        pr = rng.standard_normal(out.shape)
        pi = rng.standard_normal(out.shape)
        return lambda o: (o.re * pr).sum() + (o.im * pi).sum()
    pr = rng.standard_normal(out.shape)
    return lambda o: (o * pr).sum()


def _away_from(values, bad_points, min_dist=2e-2):
    """Shift samples that sit within min_dist of a non-smooth point."""
    out = values.copy()
    for b in bad_points:
        close = np.abs(out - b) < min_dist
        out[close] += 4 * min_dist
    return out


def _radial_margin(re, im, bad_radii):
    """Rescale complex samples so |z| stays clear of each (radius, margin)
    in bad_radii (rejection by nudging; phases are preserved). The origin
    needs a wide berth: modReLU curvature grows like 1/|z|^3, so points too
    close make the fixed-step oracle truncation-limited."""
    re, im = re.copy(), im.copy()
    for _ in range(6):
        m = np.hypot(re, im)
        close = np.zeros(m.shape, dtype=bool)
        for r, margin in bad_radii:
            close |= np.abs(m - r) < margin
        if not close.any():
            break
        factor = np.where(close, (m + 0.37) / np.maximum(m, 1e-12), 1.0)
        re *= factor
        im *= factor
    return re, im


def masked_fd_check(params, forward, step=FD_STEP):
    """Kink-aware finite-difference check for composite networks.

    Components whose +-step interval flips any activation gate (detected by
    comparing recorded mask traces) sit on a non-smooth set and are
    excluded; everything else must match the backward pass. Returns
    (max rel err, excluded, total).
    """
    for p in params:
        p.zero_grad()
    loss = forward()
    loss.backward()
    worst = 0.0
    excluded = 0
    total = 0
    for p in params:
        for t in p.tensors():
            grad = t.grad if t.grad is not None else np.zeros_like(t.data)
            flat = t.data.reshape(-1)
            gflat = grad.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + step
                with record_masks() as plus:
                    fp = forward().item()
                flat[i] = orig - step
                with record_masks() as minus:
                    fm = forward().item()
                flat[i] = orig
                total += 1
                if not plus.same_as(minus):
                    excluded += 1
                    continue
                fd = (fp - fm) / (2 * step)
                denom = max(abs(fd), abs(gflat[i]), 1e-8)
                worst = max(worst, abs(fd - gflat[i]) / denom)
    return worst, excluded, total


def gradcheck_conv(seed):
    rng = np.random.default_rng(seed)
    layer = ComplexConv2d(2, 3, kernel_size=int(rng.choice([1, 3])),
                          stride=int(rng.integers(1, 3)), padding="same",
                          bias=True, seed=seed)
    x = Parameter(rng.standard_normal((2, 2, 5, 5)),
                  rng.standard_normal((2, 2, 5, 5)), name="x")
    params = [layer.weight, layer.bias, x]
    out = layer(ComplexTensor(x.re, x.im))
    proj = _projection_loss(rng, out)
    return check_op_gradient(params, lambda: proj(layer(ComplexTensor(x.re, x.im))))


def gradcheck_dense(seed):
    rng = np.random.default_rng(seed)
    layer = ComplexDense(4, 3, bias=True, seed=seed)
    x = Parameter(rng.standard_normal((3, 4)), rng.standard_normal((3, 4)), name="x")
    out = layer(ComplexTensor(x.re, x.im))
    proj = _projection_loss(rng, out)
    return check_op_gradient([layer.weight, layer.bias, x],
                             lambda: proj(layer(ComplexTensor(x.re, x.im))))


def gradcheck_cbn(seed):
    rng = np.random.default_rng(seed)
    bn = ComplexBatchNorm(3, eps=1e-5)
    x = Parameter(rng.standard_normal((6, 3, 2, 2)),
                  rng.standard_normal((6, 3, 2, 2)), name="x")
    params = [bn.gamma_rr, bn.gamma_ri, bn.gamma_ii, bn.beta, x]
    out = bn(ComplexTensor(x.re, x.im))
    proj = _projection_loss(rng, out)
    return check_op_gradient(params, lambda: proj(bn(ComplexTensor(x.re, x.im))))


def gradcheck_activation(name, seed):
    rng = np.random.default_rng(seed)
    re = _away_from(rng.standard_normal((4, 2, 3, 3)), [0.0])
    im = _away_from(rng.standard_normal((4, 2, 3, 3)), [0.0])
    if name == "crelu":
        x = Parameter(re, im, name="x")
        fn = lambda z: crelu(z)
        params = [x]
    elif name == "zrelu":
        x = Parameter(re, im, name="x")
        fn = lambda z: zrelu(z)
        params = [x]
    else:
        b = Parameter(np.array([0.5, -0.6]), name="b")
        # stay clear of the origin and of each channel's dead-zone radius
        for c, bv in enumerate(b.re.data):
            re[:, c], im[:, c] = _radial_margin(
                re[:, c], im[:, c], [(0.0, 0.45), (max(-bv, 0.0), 0.15)])
        x = Parameter(re, im, name="x")
        fn = lambda z: modrelu(z, b.re.reshape(1, -1, 1, 1))
        params = [x, b]
    out = fn(ComplexTensor(x.re, x.im))
    proj = _projection_loss(rng, out)
    return check_op_gradient(params, lambda: proj(fn(ComplexTensor(x.re, x.im))))


def gradcheck_convlstm(seed, complex_valued=True):
    rng = np.random.default_rng(seed)
    cell = ConvLstmCell(1, 2, kernel_size=3, complex_valued=complex_valued,
                        forget_bias=0.5, seed=seed)
    # moderate input scale keeps the gates' curvature low enough for the
    # fixed finite-difference step
    frames_re = 0.4 * rng.standard_normal((3, 1, 1, 3, 3))
    frames_im = 0.4 * rng.standard_normal((3, 1, 1, 3, 3))
    xs = [Parameter(frames_re[t], frames_im[t] if complex_valued else None,
                    name=f"x{t}") for t in range(3)]
    params = cell.parameters() + xs

    def forward():
        if complex_valued:
            seq = [ComplexTensor(p.re, p.im) for p in xs]
        else:
            seq = [p.re for p in xs]
        outs, _ = unroll(cell, seq)
        if complex_valued:
            total = None
            for o in outs:
                term = (o.re * pr).sum() + (o.im * pi).sum()
                total = term if total is None else total + term
            return total
        total = None
        for o in outs:
            term = (o * pr).sum()
            total = term if total is None else total + term
        return total

    shape = (1, 2, 3, 3)
    pr = rng.standard_normal(shape)
    pi = rng.standard_normal(shape)
    return check_op_gradient(params, forward)


def gradcheck_imag_block(seed):
    from .resnet import LearnImaginaryBlock
    rng = np.random.default_rng(seed)
    block = LearnImaginaryBlock(1, 3, seed=seed)
    x = Parameter(_away_from(rng.standard_normal((3, 1, 5, 5)), [0.0]), name="x")
    params = block.parameters() + [x]
    out = block(x.re)
    proj = _projection_loss(rng, out)
    worst, _, _ = masked_fd_check(params, lambda: proj(block(x.re)))
    return worst


def gradcheck_projection(seed):
    from .resnet import ModelSpec, StageProjection
    rng = np.random.default_rng(seed)
    spec = ModelSpec(start_filters=2, blocks_per_stage=1)
    proj_layer = StageProjection(spec, 2, seed, "proj")
    x = Parameter(rng.standard_normal((2, 2, 5, 5)),
                  rng.standard_normal((2, 2, 5, 5)), name="x")
    out = proj_layer(ComplexTensor(x.re, x.im))
    proj = _projection_loss(rng, out)
    return check_op_gradient(proj_layer.parameters() + [x],
                             lambda: proj(proj_layer(ComplexTensor(x.re, x.im))))


def directional_fd_check(tensors, grads, forward, rng, n_dirs=10, step=FD_STEP,
                         max_rejections=50):
    """Directional central differences: df/dv vs grad . v on random unit
    directions. The well-posed fixed-step oracle for deep composites, where
    per-component curvature swamps dust-sized gradient entries. Directions
    whose +-step interval flips an activation gate are rejected; returns
    None if the instance itself sits on the non-smooth set.
    """
    worst = 0.0
    rejected = 0
    done = 0
    while done < n_dirs:
        vs = [rng.standard_normal(t.data.shape) for t in tensors]
        norm = np.sqrt(sum((v ** 2).sum() for v in vs))
        vs = [v / norm for v in vs]
        analytic = sum(float((g * v).sum()) for g, v in zip(grads, vs))
        for t, v in zip(tensors, vs):
            t.data += step * v
        with record_masks() as plus:
            fp = forward().item()
        for t, v in zip(tensors, vs):
            t.data -= 2 * step * v
        with record_masks() as minus:
            fm = forward().item()
        for t, v in zip(tensors, vs):
            t.data += step * v
        if not plus.same_as(minus):
            rejected += 1
            if rejected > max_rejections:
                return None
            continue
        fd = (fp - fm) / (2 * step)
        worst = max(worst, abs(fd - analytic) / max(abs(fd), abs(analytic), 1e-8))
        done += 1
    return worst


def gradcheck_resnet(seed):
    """End-to-end directional check on a tiny network. Instances whose
    configuration sits on an activation boundary (every direction crosses a
    gate) are rejected by returning None."""
    rng = np.random.default_rng(seed)
    spec = ModelSpec(variant="WS", start_filters=2, blocks_per_stage=1,
                     n_classes=2, input_channels=1, activation="crelu",
                     norm="cbn", seed=seed)
    model = build_model(spec)
    x = rng.standard_normal((3, 1, 8, 8))
    labels = rng.integers(0, 2, size=3)
    from .train import cross_entropy
    params = model.parameters()

    def forward():
        return cross_entropy(model(Tensor(x)), labels)

    for p in params:
        p.zero_grad()
    forward().backward()
    tensors = [t for p in params for t in p.tensors()]
    grads = [t.grad if t.grad is not None else np.zeros_like(t.data) for t in tensors]
    return directional_fd_check(tensors, grads, forward, rng)


def verify_gradcheck(n_instances=5, seed0=100):
    lines = []
    worst = {}
    checks = [
        ("complex_conv2d", gradcheck_conv),
        ("complex_dense", gradcheck_dense),
        ("complex_batchnorm", gradcheck_cbn),
        ("crelu", lambda s: gradcheck_activation("crelu", s)),
        ("zrelu", lambda s: gradcheck_activation("zrelu", s)),
        ("modrelu", lambda s: gradcheck_activation("modrelu", s)),
        ("convlstm_complex", lambda s: gradcheck_convlstm(s, True)),
        ("convlstm_real", lambda s: gradcheck_convlstm(s, False)),
        ("imaginary_block", gradcheck_imag_block),
        ("stage_projection", gradcheck_projection),
    ]
    for name, fn in checks:
        errs = [fn(seed0 + i) for i in range(n_instances)]
        worst[name] = max(errs)
        lines.append(f"{name}: max rel err {worst[name]:.3e} over {n_instances} instances")
    res_errs = []
    seed = seed0
    rejected_instances = 0
    while len(res_errs) < n_instances:
        err = gradcheck_resnet(seed)
        seed += 1
        if err is None:
            rejected_instances += 1  # instance sits on an activation boundary
            continue
        res_errs.append(err)
    worst["resnet_tiny"] = max(res_errs)
    lines.append(f"resnet_tiny (directional): max rel err {worst['resnet_tiny']:.3e} "
                 f"over {n_instances} instances ({rejected_instances} boundary "
                 f"instances resampled)")
    passed = all(e < GRAD_TOL for e in worst.values())
    lines.append(f"gradcheck: {'PASS' if passed else 'FAIL'} (tolerance {GRAD_TOL})")
    return passed, lines


def random_complex_batch(rng, n, c, sv_range=(0.6, 1.8)):
    """Anisotropic, correlated complex batch whose per-channel covariance has
    eigenvalues bounded away from 0, so the eps = 1e-5 Tikhonov term stays
    negligible against the stated whitening tolerances."""
    re = np.empty((n, c))
    im = np.empty((n, c))
    for ch in range(c):
        q1, _ = np.linalg.qr(rng.standard_normal((2, 2)))
        q2, _ = np.linalg.qr(rng.standard_normal((2, 2)))
        a = q1 @ np.diag(rng.uniform(*sv_range, size=2)) @ q2
        pts = a @ rng.standard_normal((2, n)) + rng.uniform(-2, 2, size=(2, 1))
        re[:, ch] = pts[0]
        im[:, ch] = pts[1]
    return re, im


def whitening_stats(out_re, out_im):
    """(|mean|, |Gamma - 1|, |C|) per channel of a (N, C) complex batch."""
    mu_re = out_re.mean(axis=0)
    mu_im = out_im.mean(axis=0)
    cr = out_re - mu_re
    ci = out_im - mu_im
    vrr = (cr * cr).mean(axis=0)
    vii = (ci * ci).mean(axis=0)
    vri = (cr * ci).mean(axis=0)
    mean_mod = np.hypot(mu_re, mu_im)
    gamma_err = np.abs(vrr + vii - 1.0)
    c_mod = np.hypot(vrr - vii, 2 * vri)
    return mean_mod, gamma_err, c_mod


def verify_whitening(n_batches=20, batch=256, channels=4, seed0=7):
    lines = []
    worst_mean = worst_gamma = worst_c = 0.0
    for i in range(n_batches):
        rng = np.random.default_rng(seed0 + i)
        re, im = random_complex_batch(rng, batch, channels)
        bn = ComplexBatchNorm(channels, eps=1e-5)
        out = bn(ComplexTensor(re, im))
        mean_mod, gamma_err, c_mod = whitening_stats(out.re.data, out.im.data)
        worst_mean = max(worst_mean, mean_mod.max())
        worst_gamma = max(worst_gamma, gamma_err.max())
        worst_c = max(worst_c, c_mod.max())
    lines.append(f"|mean| max {worst_mean:.3e} (tol 1e-6)")
    lines.append(f"|Gamma - 1| max {worst_gamma:.3e} (tol 1e-4)")
    lines.append(f"|C| max {worst_c:.3e} (tol 1e-4)")
    passed = worst_mean < 1e-6 and worst_gamma < 1e-4 and worst_c < 1e-4
    lines.append(f"whitening: {'PASS' if passed else 'FAIL'}")
    return passed, lines


def verify_initstats(n_draws=100_000, seed=11):
    lines = []
    ok = True
    configs = [
        ("glorot", 256, 256),
        ("he", 512, 256),
    ]
    for criterion, n_in, n_out in configs:
        spec = InitSpec(criterion=criterion, flavor="rayleigh_iid",
                        fan_in=n_in, fan_out=n_out, seed=seed)
        w = rayleigh_complex_init(spec, (n_draws,))
        mod2 = w.re.data ** 2 + w.im.data ** 2
        target = spec.target_variance
        var_rel = abs(mod2.mean() - target) / target
        emag = np.sqrt(mod2).mean()
        emag_target = spec.rayleigh_sigma * np.sqrt(np.pi / 2)
        emag_rel = abs(emag - emag_target) / emag_target
        resultant = np.hypot(np.cos(np.arctan2(w.im.data, w.re.data)).mean(),
                             np.sin(np.arctan2(w.im.data, w.re.data)).mean())
        ok &= var_rel < 0.02 and emag_rel < 0.02 and resultant < 0.01
        lines.append(f"rayleigh {criterion}: E|W|^2 rel err {var_rel:.4f}, "
                     f"E|W| rel err {emag_rel:.4f}, |E e^(i theta)| {resultant:.4f}")
    uspec = InitSpec(criterion="he", flavor="unitary", fan_in=2 * 9, fan_out=4 * 9, seed=seed)
    kernel_shape = (4, 2, 3, 3)
    w = unitary_complex_init(uspec, kernel_shape)
    mod2 = (w.re.data ** 2 + w.im.data ** 2).mean()
    var_rel = abs(mod2 - uspec.target_variance) / uspec.target_variance
    # re-derive the pre-rescale matrix to check semi-unitarity
    rng = np.random.default_rng(seed)
    m = (rng.standard_normal((4, 18)) + 1j * rng.standard_normal((4, 18))) / np.sqrt(2)
    from .init import _gram_schmidt_rows
    u = _gram_schmidt_rows(m)
    ortho_err = np.abs(u @ u.conj().T - np.eye(4)).max()
    ok &= var_rel < 1e-12 and ortho_err < 1e-10
    lines.append(f"unitary: var rel err {var_rel:.2e} (exact rescale), "
                 f"semi-unitarity err {ortho_err:.2e}")
    lines.append(f"initstats: {'PASS' if ok else 'FAIL'}")
    return ok, lines


def verify_budget(target=1.7e6, tol=0.10):
    lines = []
    ok = True
    for name in sorted(NAMED_CONFIGS):
        model = build_model(ModelSpec.named(name))
        n = model.num_params()
        rel = abs(n - target) / target
        ok &= rel <= tol
        lines.append(f"{name}: {n:,} params ({rel * 100:+.1f}% of 1.7M) "
                     f"{'ok' if rel <= tol else 'OUT OF BUDGET'}")
    lines.append(f"budget: {'PASS' if ok else 'FAIL'} (+-{tol * 100:.0f}%)")
    return ok, lines


def verify_ellipticity(n_seeds=20, n_layers=20, n_points=1000):
    lines = []
    full_worst = 0.0
    naive_finals = []
    for seed in range(n_seeds):
        conds = ellipticity_harness(n_points, n_layers, "full", seed)
        full_worst = max(full_worst, max(abs(c - 1.0) for c in conds))
        naive_finals.append(ellipticity_harness(n_points, n_layers, "naive", seed)[-1])
    median_naive = float(np.median(naive_finals))
    lines.append(f"full mode: max |condition - 1| = {full_worst:.2e} "
                 f"over {n_seeds} seeds x {n_layers} layers (tol 1e-6)")
    lines.append(f"naive mode: median final condition = {median_naive:.3g} (need > 10)")
    passed = full_worst < 1e-6 and median_naive > 10
    lines.append(f"ellipticity: {'PASS' if passed else 'FAIL'}")
    return passed, lines


SUITES = {
    "gradcheck": verify_gradcheck,
    "whitening": verify_whitening,
    "initstats": verify_initstats,
    "budget": verify_budget,
    "ellipticity": verify_ellipticity,
}
