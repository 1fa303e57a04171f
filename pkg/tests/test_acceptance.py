"""Acceptance criteria, each run at its stated tolerance.

Every criterion prints one summary line (also collected in the terminal
summary) followed by the verdict lines it is built from. Informational
verdicts are shown but never asserted.
"""
import functools

import pytest

from semilab import recipes


@functools.lru_cache(maxsize=None)
def report(tag: str):
    fn = recipes.RECIPES.get(tag) or getattr(recipes, tag)
    return fn()


CRITERIA = {
    "1": ("potential bracket and expansion", "potential-theorem",
          ["lambda_in_bounds", "c0_vs_min_c", "c1_vs_Lambda"], 120.0),
    "2": ("blow-up profile", "thnf-profile", ["quartic_profile_L2", "harmonic_refinement_decreasing"], None),
    "3": ("concentration weights", "th4-weights",
          ["symmetric_masses", "gamma_vs_weights_symmetric", "asymmetric_Cminmin_mass",
           "gamma_vs_weights_asymmetric"], None),
    "4": ("second-order coefficient", "thhk-expansion", ["c2_vs_theta_rs"], None),
    "5": ("gradient case", "tp-gradient",
          ["lambda_vs_pressure", "weighted_phi_mass_in_S", "gradient_profile_L2", "gradient_supnorm_slope"], None),
    "6": ("sup-norm growth", "potential-theorem", ["supnorm_slope"], None),
    "7": ("argmax velocity", None, [("potential-theorem", "argmax_d2_over_sqrt_eps_bounded"),
                                    ("tp-gradient", "gradient_argmax_decreasing")], None),
    "8": ("decay off the wells", "appendix2-decay", ["decay_ratio", "decay_exponent_increasing"], None),
    "9": ("killed Brownian kernel", "noyau", ["max_abs_z", "dt_halving_shift_in_se"], 180.0),
    "10": ("attracting cycle", "thfdtpr-cycle",
           ["psi_certificate", "weighted_L_mass_near_cycle", "lambda_vs_cycle_average"], None),
    "11": ("Lyapunov property suite", "appendix1",
           ["lyapunov_residual_over_bound", "lyapunov_min_eig", "annulus_beta2_certified",
            "annulus_beta1_rejected", "annulus_certificate_step_robust", "descent_margins_nonnegative"], None),
    "12": ("infrastructure", "infrastructure",
           ["gauge_spectrum_agreement", "expansion_fit_recovery", "bit_identical_reruns", "upwind_m_matrix"], None),
}


def _runtime_tag(tag):
    return tag.replace("-", "_") if tag not in recipes.RECIPES else tag


@pytest.mark.parametrize("cid", list(CRITERIA), ids=lambda c: f"criterion_{c}")
def test_criterion(cid, record_criterion):
    title, tag, names, max_seconds = CRITERIA[cid]
    items = [(tag, n) if isinstance(n, str) else n for n in names]
    verdicts = [report(_runtime_tag(t)).verdict(n) for t, n in items]
    failures = [v.name for v in verdicts if v.asserted and not v.passed]
    timing = ""
    if max_seconds is not None:
        secs = report(_runtime_tag(tag)).timing.get("seconds", 0.0)
        timing = f" runtime={secs:.1f}s (limit {max_seconds:.0f}s)"
        if secs > max_seconds:
            failures.append("runtime")
    extras = [v for t in {t for t, _ in items} for v in report(_runtime_tag(t)).verdicts
              if not v.asserted and v.name not in {n for _, n in items}]
    record_criterion(f"[{'FAIL' if failures else 'PASS'}] criterion {cid} ({title}){timing}"
                     + (f": failing {', '.join(failures)}" if failures else ""))
    for v in verdicts:
        print("    " + v.line())
    for v in extras:
        print("    " + v.line())
    assert not failures, "\n".join(v.line() for v in verdicts if not v.passed)


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-v", "-s"]))
