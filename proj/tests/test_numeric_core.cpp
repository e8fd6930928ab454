#include <cmath>
#include <vector>

#include "doctest.h"
#include "hapnet/gradcheck.hpp"
#include "hapnet/kernels.hpp"
#include "hapnet/param_store.hpp"
#include "hapnet/rng.hpp"
#include "hapnet/tape.hpp"
#include "hapnet/vec.hpp"

using namespace hapnet;

TEST_SUITE("numeric-core") {

TEST_CASE("rng streams are reproducible and derivation is position-independent") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());

    // deriving a substream must not depend on how far the parent advanced
    Rng fresh(42);
    Rng consumed(42);
    for (int i = 0; i < 17; ++i) consumed.next();
    CHECK(fresh.derive(7).next() == consumed.derive(7).next());

    // key order matters, keys are not interchangeable
    Rng r(1);
    CHECK(r.derive(1, 2).next() != r.derive(2, 1).next());
    CHECK(r.derive(5).next() != r.derive(6).next());
}

TEST_CASE("rng uniform and bounded stay in range, normal has sane moments") {
    Rng r(9);
    for (int i = 0; i < 1000; ++i) {
        double u = r.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        double v = r.uniform(-2.0, 3.0);
        CHECK(v >= -2.0);
        CHECK(v < 3.0);
        CHECK(r.bounded(7) < 7);
    }
    double sum = 0.0, sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        double z = r.normal();
        sum += z;
        sq += z * z;
    }
    double mean = sum / n;
    double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.03);
    CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("vec and mat validate shapes and finiteness") {
    CHECK_THROWS_AS(Vec({1.0, std::nan("")}), DomainError);
    Vec a{1.0, 2.0};
    Vec b{3.0, 4.0, 5.0};
    CHECK_THROWS_AS((void)a.dot(b), ShapeError);
    CHECK_THROWS_AS(a += b, ShapeError);
    CHECK_THROWS_AS(Mat(2, 2, {1.0, 2.0, 3.0}), ShapeError);
    CHECK_THROWS_AS(Mat(1, 2, {1.0, std::numeric_limits<double>::infinity()}), DomainError);

    Mat m(2, 3, {1, 0, 0, 0, 2, 0});
    Vec x{1, 2, 3};
    Vec y = m * x;
    CHECK(y[0] == 1.0);
    CHECK(y[1] == 4.0);
    CHECK_THROWS_AS(m * a, ShapeError);
    CHECK(a.dot(Vec{5.0, 6.0}) == 17.0);
    CHECK(Vec{3.0, 4.0}.norm() == 5.0);
}

TEST_CASE("squash shrinks norms below one and matches the closed form") {
    Vec v = squash(Vec{3.0, 4.0});
    CHECK(v[0] == doctest::Approx(0.5769230769230769).epsilon(1e-15));
    CHECK(v[1] == doctest::Approx(0.7692307692307693).epsilon(1e-15));
    CHECK(v.norm() == doctest::Approx(25.0 / 26.0).epsilon(1e-15));

    // zero maps to zero, no division blowup
    Vec z = squash(Vec{0.0, 0.0, 0.0});
    CHECK(z.norm() == 0.0);

    // norm stays below 1 for large inputs (up to rounding at ~1e8, where
    // n^2/(1+n^2) is closer to 1 than one ulp)
    Vec big = squash(Vec{1e3, 0.0});
    CHECK(big.norm() < 1.0);
    CHECK(squash(Vec{1e8, 0.0}).norm() <= 1.0);

    // direction is preserved
    Vec d = squash(Vec{1.0, 1.0});
    CHECK(d[0] == doctest::Approx(d[1]).epsilon(1e-15));
}

TEST_CASE("softmax normalizes, is shift-invariant, and rejects empty input") {
    Vec p = softmax(Vec{std::log(2.0), 0.0});
    CHECK(p[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    Vec q = softmax(Vec{1000.0, 1000.0, 1000.0}); // stabilized against overflow
    for (int i = 0; i < 3; ++i) CHECK(q[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    Vec r = softmax(Vec{5.0});
    CHECK(r[0] == 1.0);

    CHECK_THROWS_AS(softmax(Vec()), DomainError);
}

TEST_CASE("leaky relu, elu, cosine oracles") {
    CHECK(leaky_relu(-1.0, 0.2) == -0.2);
    CHECK(leaky_relu(3.0, 0.2) == 3.0);
    CHECK(leaky_relu(0.0, 0.2) == 0.0);
    CHECK(kernels::elu(2.0) == 2.0);
    CHECK(kernels::elu(-1.0) == doctest::Approx(-0.6321205588285577).epsilon(1e-15));

    CHECK(cosine_similarity(Vec{1, 0}, Vec{0, 1}) == 0.0);
    CHECK(cosine_similarity(Vec{1, 2}, Vec{2, 4}) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(cosine_similarity(Vec{1, 2}, Vec{-1, -2}) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(cosine_similarity(Vec{0, 0}, Vec{1, 2}) == 0.0);
    CHECK_THROWS_AS(cosine_similarity(Vec{1}, Vec{1, 2}), ShapeError);
}

TEST_CASE("param store tracks names, shapes and rejects duplicates") {
    ParamStore ps;
    ParamRef w = ps.add_matrix("w", 2, 3);
    ParamRef b = ps.add_vector("b", 2);
    CHECK(ps.size() == 8);
    CHECK(w.size() == 6);
    CHECK(b.off == 6);
    CHECK(ps.entry("w").shape == std::vector<int>{2, 3});
    CHECK_THROWS_AS(ps.add_vector("w", 4), ContractError);
    CHECK_THROWS_AS(ps.entry("nope"), LookupError);
    CHECK_THROWS_AS(ps.add_matrix("z", 0, 3), ShapeError);

    ps.init_uniform(Rng(5), -0.1, 0.1);
    ParamStore ps2;
    ps2.add_matrix("w", 2, 3);
    ps2.add_vector("b", 2);
    ps2.init_uniform(Rng(5), -0.1, 0.1);
    CHECK(ps.raw() == ps2.raw()); // same seed, same creation order: identical bits
    for (double x : ps.raw()) {
        CHECK(x >= -0.1);
        CHECK(x <= 0.1);
        CHECK(x != 0.0); // vanishingly unlikely under the uniform draw
    }
}

TEST_CASE("tape forward values match plain kernels") {
    ParamStore ps;
    ParamRef W = ps.add_matrix("W", 2, 3);
    ParamRef b = ps.add_vector("b", 2);
    ps.init_uniform(Rng(3), -0.5, 0.5);

    std::vector<double> x = {0.3, -0.7, 1.1};
    Tape t(&ps, nullptr);
    Var xv = t.input(x);
    Var h = t.add_param(t.matvec(W, xv), b);
    Var s = t.squash(t.tanh_(h));

    Mat Wm(2, 3, std::vector<double>(ps.values(W).begin(), ps.values(W).end()));
    Vec hv = Wm * Vec(x);
    for (int i = 0; i < 2; ++i) hv[i] = std::tanh(hv[i] + ps.values(b)[static_cast<size_t>(i)]);
    Vec sv = squash(hv);
    auto got = t.value(s);
    CHECK(got[0] == sv[0]);
    CHECK(got[1] == sv[1]);

    // values survive arena growth: build many more nodes, then re-read
    for (int i = 0; i < 200; ++i) xv = t.tanh_(xv);
    CHECK(t.value(s)[0] == sv[0]);
}

TEST_CASE("tape rejects shape mismatches and misuse") {
    ParamStore ps;
    ParamRef W = ps.add_matrix("W", 2, 3);
    ps.init_uniform(Rng(1), -0.1, 0.1);
    Tape t(&ps, nullptr);
    Var a = t.input(std::vector<double>{1.0, 2.0});
    Var c = t.input(std::vector<double>{1.0, 2.0, 3.0});
    CHECK_THROWS_AS(t.add(a, c), ShapeError);
    CHECK_THROWS_AS(t.matvec(W, a), ShapeError);
    CHECK_THROWS_AS(t.pick(a, 2), ShapeError);
    CHECK_THROWS_AS(t.dot(a, c), ShapeError);
    CHECK_THROWS_AS(t.backward(a), ContractError); // non-scalar root
    CHECK_THROWS_AS((void)t.grad(a), ContractError); // before any backward
    CHECK_THROWS_AS((void)t.scalar(a), ShapeError);
    CHECK_THROWS_AS(t.input(std::span<const double>{}), ShapeError);
}

// builds one scalar program exercising every differentiable op and checks
// the analytic gradient against central differences, element by element
TEST_CASE("tape gradients match finite differences across the full op set") {
    ParamStore ps;
    ParamRef W = ps.add_matrix("W", 3, 4);
    ParamRef b = ps.add_vector("b", 3);
    ParamRef V = ps.add_matrix("V", 3, 3);
    ParamRef u = ps.add_vector("u", 3);
    ParamRef w2 = ps.add_vector("w2", 3);
    ps.init_uniform(Rng(11), -0.6, 0.6);

    std::vector<double> x = {0.9, -0.4, 0.25, -1.3};
    DifferentiableProgram prog;
    prog.params = &ps;
    prog.forward = [&](Tape& t) {
        Var xv = t.input(x);
        Var h = t.add_param(t.matvec(W, xv), b);      // affine
        Var s = t.squash(h);                          // squash
        Var p = t.softmax(t.matvec(V, s));            // softmax
        Var uu = t.param(u);                          // raw leaf
        Var m = t.mul(p, t.tanh_(uu));                // elementwise, tanh
        Var e = t.elu(t.sub(m, t.scale(s, 0.3)));     // elu, sub, scale
        Var l = t.leaky_relu(e, 0.2);                 // leaky
        std::vector<Var> coeffs = {t.pick(p, 0), t.pick(p, 1)};
        std::vector<Var> vecs = {l, t.add(l, s)};     // add
        Var ws = t.weighted_sum(coeffs, vecs);        // weighted sum
        std::vector<Var> parts = {ws, m};
        Var cat = t.concat(parts);                    // concat
        std::vector<Var> sums = {cat, cat};
        Var two = t.sum(sums);                        // sum
        Var w2v = t.param(w2);
        Var scal = t.pack(std::vector<Var>{
            t.cosine(m, w2v),                         // cosine
            t.norm(two),                              // norm
            t.dot(s, w2v),                            // dot
        });
        Var sq = t.squash(scal);
        return t.dot(sq, t.softmax(scal));
    };

    GradCheckReport rep = gradient_check(prog, 1e-5);
    CAPTURE(rep.worst_param);
    CAPTURE(rep.worst_index);
    CHECK(rep.checked == static_cast<int>(ps.size()));
    CHECK(rep.max_rel_err < 1e-7);
}

TEST_CASE("gradients accumulate across backward calls and reset clears the graph") {
    ParamStore ps;
    ParamRef w = ps.add_vector("w", 2);
    ps.values(w)[0] = 0.5;
    ps.values(w)[1] = -0.25;

    std::vector<double> gbuf(static_cast<size_t>(ps.size()), 0.0);
    Tape t(&ps, gbuf.data());
    std::vector<double> x = {2.0, 3.0};
    Var out = t.dot(t.param(w), t.input(x));
    CHECK(t.scalar(out) == doctest::Approx(0.25).epsilon(1e-15));

    t.backward(out);
    CHECK(gbuf[0] == 2.0);
    CHECK(gbuf[1] == 3.0);
    t.backward(out); // second pass adds on top, caller owns zeroing
    CHECK(gbuf[0] == 4.0);
    CHECK(gbuf[1] == 6.0);

    t.reset();
    CHECK(t.node_count() == 0);
    Var out2 = t.dot(t.param(w), t.input(x));
    CHECK(t.scalar(out2) == doctest::Approx(0.25).epsilon(1e-15));

    // input gradients visible through grad()
    t.backward(out2, 2.0);
    CHECK(t.grad(out2)[0] == 2.0);
}

TEST_CASE("squash and norm gradients vanish at the zero vector") {
    ParamStore ps;
    ParamRef w = ps.add_vector("w", 3);
    // leave w at zero
    std::vector<double> gbuf(3, 0.0);
    Tape t(&ps, gbuf.data());
    Var out = t.norm(t.squash(t.param(w)));
    CHECK(t.scalar(out) == 0.0);
    t.backward(out);
    for (double g : gbuf) CHECK(g == 0.0);
}

TEST_CASE("gradient check covers strided subsets and reports the worst element") {
    ParamStore ps;
    ParamRef w = ps.add_vector("w", 10);
    ps.init_uniform(Rng(2), -1.0, 1.0);
    DifferentiableProgram prog;
    prog.params = &ps;
    prog.forward = [&](Tape& t) { return t.norm(t.tanh_(t.param(w))); };

    GradCheckReport all = gradient_check(prog, 1e-5);
    CHECK(all.checked == 10);
    CHECK(all.max_rel_err < 1e-8);
    CHECK(all.worst_param == "w");
    CHECK(all.worst_index >= 0);

    GradCheckReport some = gradient_check(prog, 1e-5, 3);
    CHECK(some.checked == 4); // indices 0,3,6,9
}

} // TEST_SUITE
