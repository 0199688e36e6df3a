#include <doctest.h>

#include <cmath>

#include "mfnet/errors.hpp"
#include "mfnet/resnet.hpp"
#include "oracles.hpp"

using namespace mfnet;

namespace {

ResNet scalar_chain() {
    ResNet net = ResNet::zeros(1, 1, 2, Activation::tanh(), Activation::tanh());
    for (auto& V : net.V) V.setOnes();
    return net;
}

Dataset scalar_data(double y = 0.0) {
    return oracle::dataset(Matrix::Ones(1, 1), Vector::Constant(1, y));
}

} // namespace

TEST_CASE("zero residual weights keep every layer equal to the first") {
    const Dataset data = oracle::random_dataset(4, 3, 1);
    ResNet net = oracle::random_resnet(3, 6, 4, 2);
    for (Index l = 2; l <= 4; ++l) net.V[l - 1].setZero();
    const ResCache c = resnet_forward(net, data);
    for (Index l = 2; l <= 4; ++l) {
        CHECK(oracle::inf_norm(c.alpha[l]) == 0.0);
        CHECK(c.beta[l] == c.beta[1]);
    }
    CHECK(skip_perturbation(c) == 0.0);
}

TEST_CASE("scalar residual chain forward") {
    const ResCache c = resnet_forward(scalar_chain(), scalar_data());
    const double t1 = std::tanh(1.0);
    CHECK(c.beta[1](0, 0) == 1.0);
    CHECK(c.alpha[2](0, 0) == doctest::Approx(t1).epsilon(1e-15));
    CHECK(c.beta[2](0, 0) == doctest::Approx(std::tanh(t1) + 1.0).epsilon(1e-15));
    CHECK(c.output(0) == doctest::Approx(std::tanh(std::tanh(t1) + 1.0)).epsilon(1e-15));
}

TEST_CASE("residual forward matches a per-sample loop") {
    const Dataset data = oracle::random_dataset(4, 3, 3);
    const ResNet net = oracle::random_resnet(3, 6, 4, 4);
    const ResCache c = resnet_forward(net, data);
    const oracle::ResForward ref = oracle::resnet_forward_loop(net, data.X);
    for (Index l = 1; l <= 4; ++l) CHECK(oracle::inf_norm(c.beta[l] - ref.beta[l]) < 1e-12);
    for (Index l = 2; l <= 4; ++l) CHECK(oracle::inf_norm(c.alpha[l] - ref.alpha[l]) < 1e-12);
    CHECK(oracle::inf_norm(c.output - ref.output) < 1e-12);
    CHECK(resnet_loss(c, data.y, Loss::squared()) ==
          doctest::Approx(oracle::mean_loss(ref.output, data.y, Loss::squared())).epsilon(1e-13));
}

TEST_CASE("residual gradients vanish at the loss minimum") {
    Dataset data = oracle::random_dataset(4, 3, 5);
    const ResNet net = oracle::random_resnet(3, 6, 3, 6);
    data.y = resnet_forward(net, data).output;
    const ResBackward back = resnet_backward(net, resnet_forward(net, data), data.y, Loss::pseudo_huber());
    for (const auto& G : back.G) CHECK(oracle::inf_norm(G) < 1e-12);
}

TEST_CASE("scalar residual chain gradients include the identity path") {
    const ResNet net = scalar_chain();
    const Dataset data = scalar_data(0.0);
    const ResBackward back = resnet_backward(net, resnet_forward(net, data), data.y, Loss::squared());
    const double b1 = 1.0;
    const double a2 = std::tanh(b1);
    const double b2 = std::tanh(a2) + b1;
    const double out = std::tanh(b2);
    const double dout = 2.0 * out;
    CHECK(back.G[2](0, 0) == doctest::Approx(dout * std::tanh(b2)).epsilon(1e-12));
    const double db2 = dout * (1.0 - out * out);
    const double da2 = db2 * (1.0 - std::tanh(a2) * std::tanh(a2));
    CHECK(back.G[1](0, 0) == doctest::Approx(da2 * std::tanh(b1)).epsilon(1e-12));
    const double db1 = da2 * (1.0 - std::tanh(b1) * std::tanh(b1)) + db2;
    CHECK(back.G[0](0, 0) == doctest::Approx(db1).epsilon(1e-12));
}

TEST_CASE("residual gradients agree with central differences") {
    const Dataset data = oracle::random_dataset(4, 3, 7);
    for (const auto& loss : {Loss::pseudo_huber(), Loss::squared()}) {
        const auto check = oracle::resnet_gradient_check(oracle::random_resnet(3, 6, 4, 8), data, loss, 50, 9);
        CAPTURE(loss.id());
        CHECK(check.max_rel_error < 1e-5);
    }
}

TEST_CASE("residual step scales and the zero step") {
    const ResNet net = oracle::random_resnet(3, 5, 3, 10);
    std::vector<Matrix> G;
    for (const auto& V : net.V) G.push_back(Matrix::Zero(V.rows(), V.cols()));
    ResNet same = net;
    resnet_step_inplace(same, G, 0.2);
    CHECK(same.V == net.V);

    for (auto& g : G) g.setOnes();
    ResNet stepped = net;
    resnet_step_inplace(stepped, G, 0.01);
    CHECK(stepped.V[0](0, 0) == doctest::Approx(net.V[0](0, 0) - 0.01 * 3 * 5).epsilon(1e-14));
    CHECK(stepped.V[1](0, 0) == doctest::Approx(net.V[1](0, 0) - 0.01 * 25).epsilon(1e-14));
    CHECK(stepped.V[3](0, 0) == doctest::Approx(net.V[3](0, 0) - 0.01 * 5).epsilon(1e-14));
}

TEST_CASE("one residual training step composes the operations") {
    const Dataset data = oracle::random_dataset(4, 3, 11);
    const ResNet net = oracle::random_resnet(3, 6, 3, 12);
    const Loss loss = Loss::pseudo_huber();
    const ResTrainResult r = train_resnet(net, data, loss, 0.02, 1);
    const ResNet manual = resnet_step(net, resnet_backward(net, resnet_forward(net, data), data.y, loss), 0.02);
    CHECK(r.net.V == manual.V);
    CHECK(r.records.size() == 2);
    const ResTrainResult none = train_resnet(net, data, loss, 0.02, 0);
    CHECK(none.net.V == net.V);
}

TEST_CASE("skip perturbation stays below sup |h2| along a run") {
    const Dataset data = oracle::random_dataset(4, 3, 13);
    ResNet net = oracle::random_resnet(3, 8, 4, 14);
    for (auto& V : net.V) V *= 5.0;
    const ResTrainResult r = train_resnet(net, data, Loss::pseudo_huber(), 0.01, 100);
    double worst = 0.0;
    for (const auto& rec : r.records) worst = std::max(worst, rec.skip);
    CHECK(worst > 0.0);
    CHECK(worst <= 1.0);
}

TEST_CASE("skip perturbation needs two layers") {
    const Dataset data = oracle::random_dataset(4, 3, 15);
    const ResCache c = resnet_forward(oracle::random_resnet(3, 4, 1, 16), data);
    CHECK_THROWS_AS(skip_perturbation(c), InvalidArgument);
    CHECK(std::isnan(make_record(0, 0.1, 0.0, oracle::random_resnet(3, 4, 1, 16), c).skip));
}
