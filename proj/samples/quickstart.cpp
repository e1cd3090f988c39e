// Minimal library tour: load a dataset, train a divided model, inspect the
// divisions, predict one configuration and round-trip the model file.

#include <iostream>
#include <string>
#include <vector>

#include "dal/dal.hpp"

int main(int argc, char** argv) {
    const std::string path = argc > 1 ? argv[1] : SAMPLE_DATA;
    const dal::Dataset data = dal::load_csv(path);
    std::cout << path << ": " << data.n_rows() << " rows, " << data.n_options()
              << " options\n";

    dal::TrainConfig cfg;
    cfg.local.kind = dal::LearnerKind::linear;
    cfg.seed = 7;
    const dal::DalModel model = dal::train_dal(data, cfg);

    std::cout << "chose depth " << model.depth_used << " with " << model.divisions.size()
              << " division(s)\n";
    for (const auto& div : model.divisions)
        std::cout << "  division " << div.id << ": " << div.n << " rows, mean "
                  << div.mean << "\n";

    // Categorical cells carry their level code; levels sort alphabetically,
    // so compression=lz4 is code 0.
    const std::vector<double> config{1024, 0, 1, 4};
    const double pred = dal::predict_dal(model, config);
    std::cout << "predicted " << data.performance_name << ": " << pred << "\n";

    dal::save_model(model, "storage-model.json");
    const dal::DalModel back = dal::load_model("storage-model.json");
    std::cout << "model file round trip: "
              << (dal::predict_dal(back, config) == pred ? "match" : "differ") << "\n";
    return 0;
}
