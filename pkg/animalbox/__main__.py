from animalbox.cli import main

main()
