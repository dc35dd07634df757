# Tests package for Mridangam Stroke Transcriber
