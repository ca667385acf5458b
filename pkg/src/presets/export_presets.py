import os
import warnings


def export_presets(presets, header_lines=None):
    """
    Writes hardware presets as key=value files into the top-level 'presets' folder.
    Args:
        presets - Iterable of dictionaries, each holding a 'name' plus the model
                  parameters (peak_gflops or tau_a, bandwidth_gbs or tau_b, lambda,
                  channel_factor, cores)
        header_lines - Optional mapping from preset name to comment lines written
                       above the parameters
    """

    if len(presets) == 0:
        warnings.warn("No presets specified. Exiting.")
        return

    project_dir = os.path.abspath(os.path.join(os.path.dirname(__file__), "..", ".."))
    output_dir = os.path.join(project_dir, "presets")
    os.makedirs(output_dir, exist_ok=True)
    header_lines = header_lines or {}

    for preset in presets:
        if not preset.get("name"):
            raise RuntimeError("Preset name is required to export presets")

        file_path = os.path.join(output_dir, preset["name"] + ".cfg")
        print("Creating file {file_path} with {count} parameters".format(file_path=file_path, count=len(preset)))

        with open(file_path, "w") as f:
            for line in header_lines.get(preset["name"], []):
                f.write(f"# {line}\n")
            f.write(f"name={preset['name']}\n")
            for key, value in preset.items():
                if key != "name":
                    f.write(f"{key}={value}\n")
