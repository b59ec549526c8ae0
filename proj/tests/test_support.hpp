#pragma once

// Shared fixtures and helpers for the test suites.

#include "estar/specfile.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

namespace ts {

using namespace estar;

inline BasePoly parse_q(const std::string& s, int n) { return parse_base_poly(s, n); }

struct Fixture {
    std::shared_ptr<const ValidatedChart> chart;
    EConnection conn;
    int n, N;

    explicit Fixture(const std::string& name) {
        RunSpec spec = fixture_spec(name);
        chart = std::make_shared<ValidatedChart>(spec.chart);
        conn = resolve_connection(spec);
        n = spec.n;
        N = spec.N;
    }

    FedosovSetup setup(Scalar kappa, NuTruncation t, EFormSeries B) const {
        return FedosovSetup(chart, conn, std::move(B), kappa, t);
    }
    FedosovSetup setup(Scalar kappa, NuTruncation t) const {
        return setup(kappa, t, EFormSeries(n));
    }

    PolySection p(int alpha) const { return PolySection::generator(n, N, alpha - 1); }
    PolySection qs(const std::string& text) const { return parse_section(text, n, N); }
    EFormSeries two_form(int k, int i, int j, const std::string& coeff) const {
        EFormSeries f(n);
        f.add(k, {i - 1, j - 1}, parse_q(coeff, n));
        return f;
    }
    EFormSeries one_form(int k, int i, const std::string& coeff) const {
        EFormSeries f(n);
        f.add(k, {i - 1}, parse_q(coeff, n));
        return f;
    }
};

/// Compare WSL elements after re-truncating both sides; identities that pass
/// through delta or a Fedosov derivation lose the top total degree, so tests
/// compare with an explicit margin.
inline bool wsl_equal_margin(const WSLElement& a, const WSLElement& b, int deg_margin,
                             int nu_margin = 0) {
    NuTruncation t(a.trunc().T - deg_margin, std::max(0, a.trunc().L - nu_margin));
    return a.truncated(t) == b.truncated(t);
}

}  // namespace ts
