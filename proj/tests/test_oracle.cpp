#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "elbnn/oracle.hpp"
#include "elbnn/verify.hpp"

using namespace elbnn;

TEST_CASE("ref_conv2d basics") {
    SUBCASE("identity 1x1 kernel returns the input") {
        DenseTensor x(1, 1, 3, 3);
        for (size_t i = 0; i < x.data.size(); ++i) x.data[i] = float(i);
        DenseTensor w(1, 1, 1, 1);
        w.at(0, 0, 0, 0) = 1.0f;
        ConvSpec spec{.c_in = 1, .c_out = 1, .k_h = 1, .k_w = 1};
        auto out = oracle::ref_conv2d(x, w, spec);
        for (size_t i = 0; i < x.data.size(); ++i) CHECK(out.data[i] == x.data[i]);
    }
    SUBCASE("all-ones 3x3 kernel on all-ones input gives 9 at interior sites") {
        DenseTensor x(1, 1, 5, 5), w(1, 1, 3, 3);
        for (auto& v : x.data) v = 1.0f;
        for (auto& v : w.data) v = 1.0f;
        ConvSpec spec{.c_in = 1, .c_out = 1, .k_h = 3, .k_w = 3, .stride = 1, .pad = 1};
        auto out = oracle::ref_conv2d(x, w, spec);
        CHECK(out.at(0, 0, 2, 2) == 9.0f);
        CHECK(out.at(0, 0, 0, 0) == 4.0f);  // zero padding at the corner
    }
}

TEST_CASE("finite_diff") {
    SUBCASE("quadratic loss gradient is the parameter vector") {
        std::vector<float> p = {0.5f, -1.25f, 2.0f};
        auto loss = [&]() {
            double acc = 0.0;
            for (float v : p) acc += 0.5 * double(v) * double(v);
            return acc;
        };
        auto grad = oracle::finite_diff(loss, {&p[0], &p[1], &p[2]}, 1e-3);
        for (size_t i = 0; i < p.size(); ++i)
            CHECK(grad[i] == doctest::Approx(double(p[i])).epsilon(1e-4));
    }
    SUBCASE("constant loss has zero gradient") {
        float v = 1.0f;
        auto grad = oracle::finite_diff([]() { return 3.5; }, {&v}, 1e-3);
        CHECK(grad[0] == 0.0);
    }
}

TEST_CASE("ref_sei explicit matrices") {
    SUBCASE("squeeze 6->2 at gamma 3") {
        ELConfig cfg{.c_in = 6, .c_out = 2, .gamma = 3.0f};
        auto m = oracle::sei_matrix(cfg);
        REQUIRE(m.size() == 2);
        REQUIRE(m[0].size() == 6);
        const float third = 1.0f / 3.0f;
        const float row0[6] = {third, 0, third, 0, third, 0};
        const float row1[6] = {0, third, 0, third, 0, third};
        for (int j = 0; j < 6; ++j) {
            CHECK(m[0][size_t(j)] == doctest::Approx(row0[j]));
            CHECK(m[1][size_t(j)] == doctest::Approx(row1[j]));
        }
    }
    SUBCASE("expand 2->5 at gamma 3") {
        ELConfig cfg{.c_in = 2, .c_out = 5, .gamma = 3.0f};
        auto m = oracle::sei_matrix(cfg);
        REQUIRE(m.size() == 5);
        for (int j = 0; j < 5; ++j)
            for (int c = 0; c < 2; ++c)
                CHECK(m[size_t(j)][size_t(c)] ==
                      doctest::Approx(j % 2 == c ? 1.0f / 3.0f : 0.0f));
    }
    SUBCASE("identity is a scaled identity matrix") {
        ELConfig cfg{.c_in = 3, .c_out = 3, .gamma = 2.0f};
        auto m = oracle::sei_matrix(cfg);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                CHECK(m[size_t(i)][size_t(j)] == doctest::Approx(i == j ? 0.5f : 0.0f));
    }
}

TEST_CASE("verification suite catches single-kernel mutations") {
    std::ostringstream sink;
    CHECK(run_verification(sink, VerifyKernels::production()));
    for (const char* fault : {"binconv_off_by_one", "gamma_floor", "ste_open_boundary"}) {
        std::ostringstream fault_sink;
        CHECK(!run_verification(fault_sink, VerifyKernels::with_fault(fault)));
    }
}
