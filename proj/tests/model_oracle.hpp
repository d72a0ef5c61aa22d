#pragma once

// Plain nested-loop forward pass for models without refinement blocks.

#include <cmath>
#include <vector>

#include "mffnc/model.hpp"

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat to_mat(const mffnc::Matrix& m) {
    Mat out(m.rows, std::vector<double>(m.cols));
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) out[i][j] = m.data[i * m.cols + j];
    return out;
}

inline Mat product(const Mat& a, const Mat& b) {
    Mat c(a.size(), std::vector<double>(b[0].size(), 0.0));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b[0].size(); ++j)
            for (std::size_t k = 0; k < b.size(); ++k) c[i][j] += a[i][k] * b[k][j];
    return c;
}

// softmax(q k^T / sqrt(dk)) v
inline Mat attention(const Mat& q, const Mat& k, const Mat& v, Mat* weights = nullptr) {
    const double dk = static_cast<double>(q[0].size());
    Mat a(q.size(), std::vector<double>(k.size()));
    for (std::size_t i = 0; i < q.size(); ++i) {
        double peak = -1e300;
        for (std::size_t j = 0; j < k.size(); ++j) {
            double s = 0;
            for (std::size_t c = 0; c < q[0].size(); ++c) s += q[i][c] * k[j][c];
            a[i][j] = s / std::sqrt(dk);
            peak = std::max(peak, a[i][j]);
        }
        double z = 0;
        for (double& x : a[i]) z += (x = std::exp(x - peak));
        for (double& x : a[i]) x /= z;
    }
    if (weights) *weights = a;
    return product(a, v);
}

inline std::vector<double> logits(const mffnc::FusionModel& model, const std::vector<std::size_t>& ids,
                                  std::size_t true_len, const std::array<double, 6>& stats) {
    const auto& cfg = model.config();
    auto param = [&](const char* n) { return to_mat(model.parameter(n).value()); };
    const Mat emb = param("embedding");
    const Mat pos = param("positional");
    Mat t;
    if (true_len == 0) {
        t.push_back(emb[mffnc::Vocab::kCls]);
        for (std::size_t c = 0; c < cfg.d1; ++c) t[0][c] += pos[0][c];
    }
    for (std::size_t i = 0; i < true_len; ++i) {
        std::vector<double> row(cfg.d1);
        for (std::size_t c = 0; c < cfg.d1; ++c) row[c] = emb[ids[i]][c] + pos[i][c];
        t.push_back(row);
    }
    const Mat a = param("stat.scale");
    const Mat b = param("stat.bias");
    Mat s(6, std::vector<double>(cfg.d2));
    for (std::size_t j = 0; j < 6; ++j)
        for (std::size_t c = 0; c < cfg.d2; ++c) s[j][c] = stats[j] * a[j][c] + b[j][c];

    std::vector<double> f;
    auto col_mean = [](const Mat& m) {
        std::vector<double> out(m[0].size(), 0.0);
        for (const auto& r : m)
            for (std::size_t c = 0; c < r.size(); ++c) out[c] += r[c];
        for (double& x : out) x /= static_cast<double>(m.size());
        return out;
    };
    if (cfg.fusion == mffnc::FusionMode::concat) {
        f = col_mean(t);
        const auto ms = col_mean(s);
        f.insert(f.end(), ms.begin(), ms.end());
    } else {
        const bool tq = cfg.fusion_query == mffnc::FusionQuery::tokens;
        const Mat& x1 = tq ? t : s;
        const Mat& x2 = tq ? s : t;
        const Mat wq = param("xattn.wq");
        const Mat wk = param("xattn.wk");
        const Mat wv = cfg.value_projection == mffnc::ValueProjection::separate ? param("xattn.wv") : wk;
        const Mat out = attention(product(x1, wq), product(x2, wk), product(x2, wv));
        if (tq) {
            f = col_mean(out);
        } else {
            for (const auto& r : out) f.insert(f.end(), r.begin(), r.end());
        }
    }
    const Mat w1 = param("mlp.w1"), b1 = param("mlp.b1"), w2 = param("mlp.w2"), b2 = param("mlp.b2");
    std::vector<double> h(w1[0].size());
    for (std::size_t j = 0; j < h.size(); ++j) {
        double acc = b1[0][j];
        for (std::size_t i = 0; i < f.size(); ++i) acc += f[i] * w1[i][j];
        h[j] = acc > 0 ? acc : 0.0;
    }
    std::vector<double> z(2);
    for (std::size_t j = 0; j < 2; ++j) {
        double acc = b2[0][j];
        for (std::size_t i = 0; i < h.size(); ++i) acc += h[i] * w2[i][j];
        z[j] = cfg.outer_relu && acc < 0 ? 0.0 : acc;
    }
    return z;
}

}  // namespace oracle
