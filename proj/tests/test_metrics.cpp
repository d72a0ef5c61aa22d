#include <doctest.h>

#include <cmath>
#include <vector>

#include "mffnc/error.hpp"
#include "mffnc/metrics.hpp"
#include "mffnc/rng.hpp"

using namespace mffnc;

namespace {

ConfusionMatrix cm(std::size_t tp, std::size_t tn, std::size_t fp, std::size_t fn) {
    ConfusionMatrix c;
    c.tp = tp;
    c.tn = tn;
    c.fp = fp;
    c.fn = fn;
    return c;
}

}  // namespace

TEST_CASE("confusion counts") {
    const int labels_a[] = {1, 1, 0, 0};
    CHECK(compute_confusion(labels_a, labels_a) == cm(2, 2, 0, 0));
    const int all_one[] = {1, 1, 1, 1};
    const int alt[] = {1, 0, 1, 0};
    CHECK(compute_confusion(all_one, alt) == cm(2, 0, 2, 0));
    const int three[] = {1, 0, 1};
    CHECK_THROWS_AS(compute_confusion(three, alt), UsageError);
    CHECK_THROWS_AS(compute_confusion(std::span<const int>(), std::span<const int>()), UsageError);
    const int bad[] = {1, 2, 0, 0};
    CHECK_THROWS_AS(compute_confusion(bad, alt), UsageError);
}

TEST_CASE("derived metrics") {
    const MetricsReport a = metrics_from_confusion(cm(50, 40, 10, 0));
    CHECK(a.accuracy == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(a.precision == doctest::Approx(50.0 / 60.0).epsilon(1e-15));
    CHECK(a.recall == 1.0);
    CHECK(a.f1 == doctest::Approx(2.0 * (5.0 / 6.0) / (5.0 / 6.0 + 1.0)).epsilon(1e-15));
    CHECK(metrics_to_json(a) ==
          "{\"accuracy\":0.900000,\"precision\":0.833333,\"recall\":1.000000,\"f1\":0.909091,"
          "\"confusion\":{\"tp\":50,\"tn\":40,\"fp\":10,\"fn\":0}}\n");

    const MetricsReport s = metrics_from_confusion(cm(25, 25, 25, 25));
    CHECK(s.accuracy == 0.5);
    CHECK(s.precision == 0.5);
    CHECK(s.recall == 0.5);
    CHECK(s.f1 == 0.5);

    const MetricsReport none = metrics_from_confusion(cm(0, 10, 0, 5));
    CHECK(none.precision == 0.0);
    CHECK(none.recall == 0.0);
    CHECK(none.f1 == 0.0);
    const MetricsReport no_pos = metrics_from_confusion(cm(0, 7, 3, 0));
    CHECK(no_pos.recall == 0.0);
    CHECK(no_pos.precision == 0.0);
    CHECK_THROWS_AS(metrics_from_confusion(ConfusionMatrix{}), UsageError);
}

TEST_CASE("recount oracle over random vectors") {
    Rng rng(2024);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 1 + rng.below(40);
        std::vector<int> p(n), y(n);
        // Skewed rates so degenerate cases come up often.
        const double rp = rng.uniform(), ry = rng.uniform();
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = rng.bernoulli(rp) ? 1 : 0;
            y[i] = rng.bernoulli(ry) ? 1 : 0;
        }
        double correct = 0, pred_pos = 0, true_pos = 0, actual_pos = 0;
        for (std::size_t i = 0; i < n; ++i) {
            correct += p[i] == y[i];
            pred_pos += p[i];
            actual_pos += y[i];
            true_pos += p[i] && y[i];
        }
        const double prec = pred_pos > 0 ? true_pos / pred_pos : 0.0;
        const double rec = actual_pos > 0 ? true_pos / actual_pos : 0.0;
        const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
        const MetricsReport r = metrics_from_confusion(compute_confusion(p, y));
        CHECK(r.confusion.total() == n);
        CHECK(std::abs(r.accuracy - correct / static_cast<double>(n)) <= 1e-12);
        CHECK(std::abs(r.precision - prec) <= 1e-12);
        CHECK(std::abs(r.recall - rec) <= 1e-12);
        CHECK(std::abs(r.f1 - f1) <= 1e-12);
        if (r.precision > 0 && r.recall > 0)
            CHECK(std::abs(1.0 / r.f1 - 0.5 * (1.0 / r.precision + 1.0 / r.recall)) <= 1e-12);
    }
}
