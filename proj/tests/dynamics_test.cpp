#include "reduxion/dynamics.hpp"
#include "reduxion/error.hpp"
#include "reduxion/montecarlo.hpp"
#include "reduxion/scenarios.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace reduxion;
using reduxion::test::label;

namespace {

// Composite Simpson rule on [a, b] with n (even) panels.
template <class F>
double simpson(F f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

// Raised-cosine bump written out independently of the library.
double bump(double t, double start, double duration) {
    const double x = (t - start) / duration;
    if (x < 0.0 || x > 1.0) return 0.0;
    return (1.0 - std::cos(2.0 * std::numbers::pi * x)) / duration;
}

double undecayed(const Superposition& s) {
    const Component* c = s.find(label("D0.M:idle.I0"));
    return c ? c->modulus : 0.0;
}

}  // namespace

TEST_CASE("decay rate law") {
    CHECK(decay_rate(0.2, 1.0, 1.0) == doctest::Approx(std::numbers::ln2));
    CHECK(decay_rate(1.0, 1.0, 0.7) == 0.0);
    CHECK(decay_rate(3.0, 1.0, 0.7) == 0.0);
    CHECK(decay_rate(0.1, 1.0, 0.0) == 0.0);
    CHECK(decay_exposure(0.9, 0.5, 1.0) == doctest::Approx(std::numbers::ln2 * 0.1));
    CHECK(decay_exposure(1.2, 0.1, 1.0) == 0.0);
}

TEST_CASE("undecayed modulus follows the exponential and then freezes") {
    const ScenarioSpec spec = build("bare-apparatus");
    const Network net = make_network(spec);
    const double h = spec.half_life;
    const double lambda = std::log(2.0) / h;

    SUBCASE("dt = half_life / 1000") {
        Stepper stepper(net, h / 1000.0);
        DenseState state = stepper.make_state(net.initial(), 1.0, 0.0);
        StepRecord record;
        double worst = 0.0;
        while (state.time < h - 1e-12) {
            stepper.step(state, record);
            const double m = undecayed(to_superposition(net, state));
            worst = std::max(worst, std::abs(m - std::exp(-lambda * state.time)));
        }
        CHECK(worst <= 1e-4);
        const double at_cutoff = undecayed(to_superposition(net, state));
        for (int i = 0; i < 500; ++i) stepper.step(state, record);
        CHECK(undecayed(to_superposition(net, state)) == at_cutoff);
    }

    SUBCASE("dt = half_life / 10000") {
        Stepper stepper(net, h / 10000.0);
        DenseState state = stepper.make_state(net.initial(), 1.0, 0.0);
        StepRecord record;
        while (state.time < h - 1e-12) stepper.step(state, record);
        CHECK(undecayed(to_superposition(net, state)) == doctest::Approx(0.5).epsilon(1e-6));
    }
}

TEST_CASE("empty transport stays empty") {
    const PulseBins bins(16);
    const AdvectResult r = advect(bins, 0.0, 0.01, 1.0);
    CHECK(r.outflow_to_done == 0.0);
    CHECK(r.bins.mass == bins.mass);
}

TEST_CASE("an impulse cannot reach Done before the pulse has crossed the device") {
    const int n = 32;
    const double duration = 1.0;
    const double dt = duration / n / 4.0;
    PulseBins bins(n);
    auto r = advect(bins, 1.0 / dt, dt, duration);
    bins = r.bins;
    double first_arrival = -1.0;
    for (int i = 0; i < 8 * n * 4 && bins.total() > 1e-15; ++i) {
        r = advect(bins, 0.0, dt, duration);
        if (r.outflow_to_done > 0.0 && first_arrival < 0.0) first_arrival = r.bins.time;
        bins = r.bins;
    }
    REQUIRE(first_arrival > 0.0);
    CHECK(first_arrival >= duration * (1.0 - 1.0 / n) - 1e-12);
}

TEST_CASE("advection conserves mass against a ten times finer grid") {
    const double duration = 1.0;
    const double half_life = 1.0;
    const double lambda = std::log(2.0) / half_life;

    // Decay-shaped injection of total 0.5 over the half-life, then drain.
    auto run = [&](int n, double dt) {
        PulseBins bins(n);
        double injected = 0.0;
        double done = 0.0;
        double worst_balance = 0.0;
        const int steps = static_cast<int>(std::lround((half_life + 3.0 * duration) / dt));
        for (int i = 0; i < steps; ++i) {
            const double t = i * dt;
            const double a = std::min(t, half_life);
            const double b = std::min(t + dt, half_life);
            const double amount = std::exp(-lambda * a) - std::exp(-lambda * b);
            const auto r = advect(bins, amount / dt, dt, duration);
            injected += amount;
            done += r.outflow_to_done;
            bins = r.bins;
            worst_balance = std::max(worst_balance, std::abs(injected - done - bins.total()));
        }
        return std::tuple{done, bins.total(), worst_balance};
    };

    const auto [done, left, balance] = run(64, 1.0 / 640.0);
    const auto [fine_done, fine_left, fine_balance] = run(640, 1.0 / 6400.0);
    CHECK(done == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(left < 1e-6);
    CHECK(balance < 1e-12);
    CHECK(fine_balance < 1e-12);
    CHECK(std::abs(done - fine_done) < 1e-6);
    CHECK(std::abs(left - fine_left) < 1e-6);
}

TEST_CASE("advect rejects steps longer than a bin") {
    CHECK_THROWS_AS(advect(PulseBins(100), 0.0, 0.02, 1.0), StepTooLarge);
    const Network net = make_network(build("bare-apparatus"));
    CHECK_THROWS_AS(Stepper(net, 0.1), StepTooLarge);
}

TEST_CASE("ramp has no support outside its window") {
    CHECK(phys_ramp_rate(0.1, 0.3, 0.05, 1.0) == 0.0);
    CHECK(phys_ramp_rate(0.4, 0.3, 0.05, 1.0) == 0.0);
    CHECK(ramp_exposure(0.0, 0.1, 0.3, 0.05) == 0.0);
    CHECK(ramp_exposure(0.5, 0.1, 0.3, 0.05) == 0.0);
}

TEST_CASE("ramp drains static sources completely") {
    const double start = 0.3;
    const double duration = 0.05;
    const double dt = duration / 2000.0;

    auto transferred = [&](double m0) {
        double m = m0;
        double moved = 0.0;
        for (double t = start - 10 * dt; t < start + duration + 10 * dt; t += dt) {
            const double h = ramp_exposure(t, dt, start, duration);
            const double out = std::isinf(h) ? m : m * -std::expm1(-h);
            m -= out;
            moved += out;
        }
        return moved;
    };

    for (double m0 : {1.0, 0.3, 0.7}) {
        CAPTURE(m0);
        const double oracle = m0 * simpson([&](double t) { return bump(t, start, duration); }, start, start + duration, 2000);
        CHECK(transferred(m0) == doctest::Approx(oracle).epsilon(1e-6));
        CHECK(oracle == doctest::Approx(m0).epsilon(1e-6));
    }
}

TEST_CASE("bare apparatus settles into two equal components") {
    const Simulator sim(build("bare-apparatus"));
    const DeterministicRun run = sim.deterministic();
    double d0 = 0.0, done = 0.0, pulse = 0.0;
    for (const auto& c : run.final_state.components) {
        if (c.label.detector == Detector::D0) d0 += c.modulus;
        else if (c.label.device("M")->phase == DeviceState::Phase::Done) done += c.modulus;
        else pulse += c.modulus;
    }
    CHECK(d0 == doctest::Approx(0.5).epsilon(1e-4));
    CHECK(done == doctest::Approx(0.5).epsilon(1e-4));
    CHECK(pulse <= 1e-6);
    CHECK(run.terminal == "Eq1-plateau");
}

TEST_CASE("halving the step converges at first order or better") {
    auto final_done = [](double dt) {
        SimulationOptions opt;
        opt.dt = dt;
        const Simulator sim(build("bare-apparatus"), opt);
        double done = 0.0;
        for (const auto& c : sim.deterministic().final_state.components)
            if (c.label.device("M")->phase == DeviceState::Phase::Done) done += c.modulus;
        return done;
    };
    const double a = final_done(1.0 / 1000.0);
    const double b = final_done(1.0 / 2000.0);
    const double c = final_done(1.0 / 4000.0);
    CHECK(std::abs(a - b) <= 1.0 / 1000.0);
    CHECK(std::abs(b - c) <= 1.0 / 2000.0);
    CHECK(std::abs(c - 0.5) <= 1.0 / 4000.0);
}

TEST_CASE("every step conserves modulus and matches its ledger") {
    for (const std::string name : {"bare-apparatus", "apparatus-observer", "version2-natural"}) {
        CAPTURE(name);
        const ScenarioSpec spec = build(name);
        const Network net = make_network(spec);
        Stepper stepper(net, default_dt(spec.half_life, spec.device_durations()));
        DenseState state = stepper.make_state(net.initial(), 1.0, 0.0);
        StepRecord record;
        double worst_total = 0.0;
        double worst_ledger = 0.0;
        for (int i = 0; i < 6000; ++i) {
            const std::vector<double> before = state.modulus;
            const double total = state.total();
            stepper.step(state, record);
            worst_total = std::max(worst_total, std::abs(state.total() - total));
            std::vector<double> net_flow(state.modulus.size(), 0.0);
            for (const auto& t : record.transfers) {
                net_flow[t.source] -= t.amount;
                net_flow[t.target] += t.amount;
            }
            for (std::size_t k = 0; k < state.modulus.size(); ++k) {
                const double prev = k < before.size() ? before[k] : 0.0;
                worst_ledger = std::max(worst_ledger, std::abs(state.modulus[k] - prev - net_flow[k]));
            }
        }
        CHECK(worst_total <= 1e-12);
        CHECK(worst_ledger <= 1e-12);
    }
}

TEST_CASE("a state with no active channel is a fixed point") {
    const Network net = make_network(build("bare-apparatus"));
    Superposition done;
    done.time = 2.0;
    done.components.push_back({label("D1.M:done.I1"), 1.0, 1.0});
    const auto [next, ledger] = step(done, net, 1e-3);
    CHECK(ledger.entries.empty());
    REQUIRE(next.components.size() == 1);
    CHECK(next.components[0].modulus == 1.0);
    CHECK(next.components[0].label == done.components[0].label);
}
