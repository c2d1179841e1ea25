// Train a blended interaction model on a synthetic three-class corpus, then
// stream one held-out interaction that switches class halfway through and
// print how the class posterior and the robot response evolve.

#include <cstdio>
#include <iostream>

#include "bbip/bbip.hpp"

int main() {
    try {
        bbip::SyntheticConfig cfg;
        cfg.seed = 1;
        cfg.noise = 0.02;
        const auto corpus = bbip::generate_synthetic(cfg);
        const auto trained = bbip::train_with_report(bbip::group_by_label(corpus.demos));
        const auto& model = trained.model;
        std::printf("trained %zu classes, %zu weights per member\n", model.class_count(), model.basis().weight_count());

        bbip::SyntheticConfig held_out = cfg;
        held_out.seed = 2;
        held_out.per_class = 1;
        held_out.switching = bbip::SwitchSpec{0.5, 0.1};
        const auto test = bbip::generate_synthetic(held_out);
        const auto& demo = test.demos.front();
        const auto& truth = test.truth.front();
        std::printf("stream: %s -> %s at frame %zu of %zu\n", truth.from_class.c_str(), truth.to_class->c_str(),
                    *truth.switch_index, demo.sample_count());

        bbip::InferenceSession session(model, 7);
        for (std::size_t t = 0; t < demo.sample_count(); ++t) {
            const auto out = session.step(bbip::observation_at(demo, t));
            if (t % 10 == 0 || out.finished) {
                std::printf("frame %3zu  p =", t);
                for (Eigen::Index c = 0; c < out.class_posterior.size(); ++c) std::printf(" %.2f", out.class_posterior(c));
                std::printf("  response =");
                for (Eigen::Index d = 0; d < out.response.size(); ++d) std::printf(" %+.3f", out.response(d));
                std::printf("  truth =");
                const auto actual = demo.controlled().col(static_cast<Eigen::Index>(t));
                for (Eigen::Index d = 0; d < actual.size(); ++d) std::printf(" %+.3f", actual(d));
                std::printf("\n");
            }
            if (out.finished) break;
        }

        // Models round-trip through a checksummed text format.
        const auto text = bbip::serialize_model(model);
        const auto restored = bbip::deserialize_model(text);
        std::printf("serialized model: %zu bytes, round trip %s\n", text.size(),
                    bbip::serialize_model(restored) == text ? "identical" : "DIFFERENT");
    } catch (const bbip::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
