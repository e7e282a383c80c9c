#include "elbnn/adam.hpp"

#include <algorithm>
#include <cmath>

namespace elbnn {

void adam_step(const std::vector<Param*>& params, AdamState& state, float lr) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(double(state.beta1), double(state.step));
    const double bc2 = 1.0 - std::pow(double(state.beta2), double(state.step));

    for (Param* p : params) {
        if (p->kind == ParamKind::bn_stat) continue;
        if (p->m.size() != p->value.size()) {
            p->m.assign(p->value.size(), 0.0f);
            p->v.assign(p->value.size(), 0.0f);
        }
        for (size_t i = 0; i < p->value.size(); ++i) {
            const float g = p->grad[i];
            p->m[i] = state.beta1 * p->m[i] + (1.0f - state.beta1) * g;
            p->v[i] = state.beta2 * p->v[i] + (1.0f - state.beta2) * g * g;
            const double m_hat = double(p->m[i]) / bc1;
            const double v_hat = double(p->v[i]) / bc2;
            p->value[i] -= float(double(lr) * m_hat / (std::sqrt(v_hat) + double(state.eps)));
        }
        if (p->kind == ParamKind::binary_latent) {
            for (auto& v : p->value) v = std::clamp(v, -1.0f, 1.0f);
        } else if (p->kind == ParamKind::gamma) {
            for (auto& v : p->value)
                if (std::fabs(v) < 1e-3f) v = std::copysign(1e-3f, v == 0.0f ? 1.0f : v);
        }
    }
}

}  // namespace elbnn
