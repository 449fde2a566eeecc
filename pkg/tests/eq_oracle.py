"""Independent straight-line transcription of the servo encoding math.

Kept deliberately free of wrenchlink.wrench_map internals: every weight,
coefficient, and per-servo sum is written out as explicit scalar arithmetic
so it can disagree with the implementation if either side is wrong.
"""


def coefficient_oracle(tau, f, sigma, cfg):
    if abs(f) < cfg.weight_epsilon:
        return 1.0
    value = 1.0 + sigma * cfg.kappa_r * (tau / f + cfg.delta)
    if value < cfg.c_min:
        return cfg.c_min
    return value


def increments_oracle(w, cfg):
    """Pre-clamp increments for servos 1..4, summed in fy, fx, fz, tz order."""
    a_fx = abs(w.fx)
    a_fy = abs(w.fy)
    a_fz = abs(w.fz)
    a_tz = abs(w.tz)
    total = a_fx + a_fy + a_fz + a_tz
    if total < cfg.weight_epsilon:
        w_fx = w_fy = w_fz = w_tz = 0.0
    else:
        w_fx = a_fx / total
        w_fy = a_fy / total
        w_fz = a_fz / total
        w_tz = a_tz / total

    inc = []
    for i in (0, 1, 2, 3):
        c_fy = coefficient_oracle(w.tx, w.fy, cfg.sigma_fy[i], cfg)
        c_fx = coefficient_oracle(w.ty, w.fx, cfg.sigma_fx[i], cfg)
        total_i = (
            w_fy * cfg.kappa_fy * cfg.sign_fy[i] * c_fy * w.fy
            + w_fx * cfg.kappa_fx * cfg.sign_fx[i] * c_fx * w.fx
            + w_fz * cfg.kappa_fz * cfg.sign_fz[i] * 1.0 * w.fz
            + w_tz * cfg.kappa_tz * cfg.sign_tz[i] * 1.0 * w.tz
        )
        inc.append(total_i)
    return tuple(inc)


def angles_oracle(w, cfg):
    """Clamped servo angles per the same straight-line math."""
    inc = increments_oracle(w, cfg)
    out = []
    for i in (0, 1, 2, 3):
        angle = cfg.theta_init[i] + inc[i]
        if angle < cfg.angle_min:
            angle = cfg.angle_min
        elif angle > cfg.angle_max:
            angle = cfg.angle_max
        out.append(angle)
    return tuple(out)
